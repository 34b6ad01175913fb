#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eswt/ops.hpp"
#include "eswt/tensor.hpp"

namespace eswt {

// 1x1 or 3x3 convolution layer. The bias lives in a (1,1,1,c_out) tensor so
// that parameter visitation stays uniform.
template <typename T>
struct Conv2dLayer {
    int c_in = 0, c_out = 0, k = 1;
    Param<T> w;
    Param<T> b;

    Conv2dLayer() = default;
    Conv2dLayer(int c_in_, int c_out_, int k_)
        : c_in(c_in_), c_out(c_out_), k(k_), w(Tensor<T>(c_out_, c_in_, k_, k_)),
          b(Tensor<T>(1, 1, 1, c_out_)) {}

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w.value, b.value.data); }

    // accumulates parameter grads; returns nothing, caller owns gx
    void backward(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx) {
        conv2d_vjp(x, w.value, gout, gx, &w.grad, &b.grad.data);
    }
};

template <typename T>
struct BatchNormLayer {
    int c = 0;
    Param<T> gamma;
    Param<T> beta;
    std::vector<T> run_mean, run_var;
    T eps = T(1e-5);
    T momentum = T(0.9);
    bool folded = false;  // identity at inference once folded into the conv

    BatchNormLayer() = default;
    explicit BatchNormLayer(int c_) : c(c_), gamma(Tensor<T>(1, 1, 1, c_)), beta(Tensor<T>(1, 1, 1, c_)) {
        gamma.value.fill(T(1));
        run_mean.assign(c_, T(0));
        run_var.assign(c_, T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, BnCache<T>* cache = nullptr) {
        if (folded && mode == Mode::infer) return x;
        return batchnorm(x, gamma.value.data, beta.value.data, run_mean, run_var, eps, momentum,
                         mode, cache);
    }

    void backward(const BnCache<T>& cache, const Tensor<T>& gout, Tensor<T>* gx) {
        batchnorm_vjp(cache, gamma.value.data, gout, gx, &gamma.grad.data, &beta.grad.data);
    }
};

// Folds a BN layer into the convolution that feeds it and marks the BN as
// absorbed for inference.
template <typename T>
void fold_into_conv(Conv2dLayer<T>& conv, BatchNormLayer<T>& bn) {
    fold_bn(conv.w.value, conv.b.value.data, bn.gamma.value.data, bn.beta.value.data, bn.run_mean,
            bn.run_var, bn.eps);
    bn.folded = true;
}

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;
template <typename T>
using BufferVisitor = std::function<void(const std::string&, std::vector<T>&)>;

template <typename T>
void visit_params(Conv2dLayer<T>& l, const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".w", l.w);
    f(prefix + ".b", l.b);
}

template <typename T>
void visit_params(BatchNormLayer<T>& l, const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".gamma", l.gamma);
    f(prefix + ".beta", l.beta);
}

template <typename T>
void visit_buffers(BatchNormLayer<T>& l, const std::string& prefix, const BufferVisitor<T>& f) {
    f(prefix + ".run_mean", l.run_mean);
    f(prefix + ".run_var", l.run_var);
}

}  // namespace eswt
