#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eswt/rng.hpp"
#include "eswt/tensor.hpp"

namespace eswt {

// Finite-difference validation of vjp implementations. Run in double; inputs
// should be O(1) so the central-difference step of 1e-5 keeps truncation and
// cancellation error well below the tolerances asserted by the tests.

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::vector<double> per_input;  // max relative error for each input
    bool finite = true;
    std::string worst;  // "input 2, element 17"

    bool ok(double tol) const { return finite && max_rel_err < tol; }
};

using GcForward = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
// maps (inputs, cotangent) to per-input cotangents
using GcVjp = std::function<std::vector<Tensor<double>>(const std::vector<Tensor<double>>&,
                                                        const Tensor<double>&)>;

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline GradCheckReport grad_check(const GcForward& fwd, const GcVjp& vjp,
                                  std::vector<Tensor<double>> inputs, std::uint64_t seed = 17,
                                  double step = 1e-5) {
    GradCheckReport rep;
    Tensor<double> out = fwd(inputs);
    Rng rng = derive_rng(seed, "gradcheck-cotangent");
    Tensor<double> u(out.n, out.c, out.h, out.w);
    for (auto& v : u.data) v = rng.uniform(-1.0, 1.0);

    const std::vector<Tensor<double>> grads = vjp(inputs, u);
    for (std::size_t gi = 0; gi < grads.size(); ++gi)
        for (double g : grads[gi].data)
            if (!std::isfinite(g)) {
                rep.finite = false;
                rep.worst = "non-finite gradient in input " + std::to_string(gi);
                return rep;
            }

    rep.per_input.assign(inputs.size(), 0.0);
    for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
        for (std::size_t e = 0; e < inputs[ii].numel(); ++e) {
            const double orig = inputs[ii].data[e];
            inputs[ii].data[e] = orig + step;
            Tensor<double> fp = fwd(inputs);
            inputs[ii].data[e] = orig - step;
            Tensor<double> fm = fwd(inputs);
            inputs[ii].data[e] = orig;
            double dot = 0;
            for (std::size_t j = 0; j < u.numel(); ++j) dot += u.data[j] * (fp.data[j] - fm.data[j]);
            const double numeric = dot / (2.0 * step);
            const double analytic = grads[ii].data[e];
            const double err = rel_err(analytic, numeric);
            rep.per_input[ii] = std::max(rep.per_input[ii], err);
            if (err > rep.max_rel_err) {
                rep.max_rel_err = err;
                rep.worst = "input " + std::to_string(ii) + ", element " + std::to_string(e);
            }
        }
    }
    return rep;
}

}  // namespace eswt
