// Command-line driver: training, inference, evaluation, and complexity
// profiling for the striped-window super-resolution model.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eswt/eswt.hpp"

namespace fs = std::filesystem;
using namespace eswt;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;

// ---------------------------------------------------------------------------
// checkpoint metadata: the model configuration rides along as a float entry
// so `infer` and `eval` can rebuild the model from the file alone
// ---------------------------------------------------------------------------

void append_config_entry(const ModelConfig& cfg, CheckpointWriter& wr) {
    std::vector<float> meta = {static_cast<float>(cfg.c_in),
                               static_cast<float>(cfg.channels),
                               static_cast<float>(cfg.n_blocks),
                               static_cast<float>(cfg.m_layers),
                               static_cast<float>(cfg.sr_scale),
                               static_cast<float>(cfg.window.h),
                               static_cast<float>(cfg.window.w),
                               static_cast<float>(cfg.mlp_ratio),
                               cfg.block_residual ? 1.0f : 0.0f,
                               cfg.attention.literal_scale_after_softmax ? 1.0f : 0.0f};
    wr.add("meta:config", {static_cast<std::uint32_t>(meta.size())}, meta);
}

ModelConfig read_config_entry(const CheckpointReader& rd) {
    const ckpt::Entry* e = rd.find("meta:config");
    if (!e || e->count() != 10)
        throw std::runtime_error("checkpoint carries no model configuration");
    const float* m = rd.payload.data() + e->offset;
    ModelConfig cfg;
    cfg.c_in = static_cast<int>(m[0]);
    cfg.channels = static_cast<int>(m[1]);
    cfg.n_blocks = static_cast<int>(m[2]);
    cfg.m_layers = static_cast<int>(m[3]);
    cfg.sr_scale = static_cast<int>(m[4]);
    cfg.window = WindowSpec(static_cast<int>(m[5]), static_cast<int>(m[6]));
    cfg.mlp_ratio = m[7];
    cfg.block_residual = m[8] != 0.0f;
    cfg.attention.literal_scale_after_softmax = m[9] != 0.0f;
    cfg.validate();
    return cfg;
}

void save_train_checkpoint(EswtModel<float>& model, const TrainState& state,
                           const std::string& path) {
    CheckpointWriter wr;
    append_model_entries(model, wr);
    append_config_entry(model.cfg, wr);
    visit_params<float>(model, [&](const std::string& name, Param<float>& p) {
        wr.add("opt:m:" + name, tensor_dims(p.value), p.m.data);
        wr.add("opt:v:" + name, tensor_dims(p.value), p.v.data);
    });
    wr.add("opt:state", {2},
           {static_cast<float>(state.adam_t), static_cast<float>(state.start_iter)});
    wr.write(path);
}

bool load_train_state(const CheckpointReader& rd, EswtModel<float>& model, TrainState* state) {
    const ckpt::Entry* st = rd.find("opt:state");
    if (!st || st->count() != 2) return false;
    state->adam_t = static_cast<std::int64_t>(rd.payload[st->offset]);
    state->start_iter = static_cast<int>(rd.payload[st->offset + 1]);
    bool complete = true;
    visit_params<float>(model, [&](const std::string& name, Param<float>& p) {
        const ckpt::Entry* em = rd.find("opt:m:" + name);
        const ckpt::Entry* ev = rd.find("opt:v:" + name);
        if (!em || !ev || em->count() != p.value.numel() || ev->count() != p.value.numel()) {
            complete = false;
            return;
        }
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            p.m.data[i] = rd.payload[em->offset + i];
            p.v.data[i] = rd.payload[ev->offset + i];
        }
    });
    return complete;
}

// ---------------------------------------------------------------------------
// dataset loading
// ---------------------------------------------------------------------------

DatasetSpec load_dataset(const DataConfig& data) {
    if (data.source == "synth")
        return synth_dataset(data.synth.seed, data.synth.count, data.synth.size);
    DatasetSpec ds;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(data.path))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ds.images.push_back(load_ppm(f.string()));
    if (ds.images.empty()) throw ConfigError("no .ppm images found in " + data.path);
    return ds;
}

std::string csv_escape_window(const WindowSpec& w) {
    return std::to_string(w.h) + "," + std::to_string(w.w);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume_path) {
    RunConfig rc;
    try {
        rc = load_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    fs::create_directories(out_dir);

    DatasetSpec ds;
    try {
        ds = load_dataset(rc.data);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    EswtModel<float> model(rc.model);
    TrainState state;
    if (!resume_path.empty()) {
        try {
            model = load_checkpoint<float>(resume_path, rc.model);
            CheckpointReader rd(resume_path);
            if (!load_train_state(rd, model, &state))
                std::cerr << "note: checkpoint has no optimizer state, starting moments fresh\n";
        } catch (const std::exception& e) {
            std::cerr << "config error: cannot resume from " << resume_path << ": " << e.what()
                      << "\n";
            return kExitConfig;
        }
        std::cout << "resumed at iteration " << state.start_iter << "\n";
    } else {
        model = init_model<float>(rc.model, rc.train.seed);
    }

    const std::string metrics_tmp = (fs::path(out_dir) / "metrics.csv.tmp").string();
    const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream metrics(metrics_tmp);
    metrics << "iter,stage,window_h,window_w,lr,loss\n";

    TrainCallbacks cb;
    cb.on_iteration = [&](const TrainRecord& r) {
        metrics << r.iter << "," << r.stage << "," << csv_escape_window(r.window) << "," << r.lr
                << "," << r.loss << "\n";
        if (r.iter % 100 == 0)
            std::cout << "iter " << r.iter << " stage " << r.stage << " window "
                      << r.window.str() << " lr " << r.lr << " loss " << r.loss << std::endl;
    };
    int completed_stages = 0;
    cb.on_stage_end = [&](int stage) {
        CheckpointWriter wr;
        append_model_entries(model, wr);
        append_config_entry(model.cfg, wr);
        wr.write((fs::path(out_dir) / ("stage" + std::to_string(stage + 1) + ".ckpt")).string());
        ++completed_stages;
    };

    try {
        train_loop(model, ds, rc.train, cb, &state);
    } catch (const TrainAbort& e) {
        const std::string abort_path = (fs::path(out_dir) / "abort.ckpt").string();
        save_train_checkpoint(model, state, abort_path);
        std::cerr << "training aborted: " << e.what() << "; checkpoint written to " << abort_path
                  << "\n";
        return kExitNonFinite;
    }

    save_train_checkpoint(model, state, (fs::path(out_dir) / "final.ckpt").string());
    metrics.close();
    fs::rename(metrics_tmp, metrics_path);
    std::cout << "done: " << completed_stages << " stage(s), final checkpoint at "
              << (fs::path(out_dir) / "final.ckpt").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

int cmd_infer(const std::string& ckpt_path, const std::string& in_path,
              const std::string& out_path, int scale, bool fold) {
    ModelConfig cfg;
    EswtModel<float> model;
    try {
        CheckpointReader rd(ckpt_path);
        cfg = read_config_entry(rd);
        if (scale > 0 && scale != cfg.sr_scale) {
            std::cerr << "config error: checkpoint was trained for x" << cfg.sr_scale
                      << ", requested x" << scale << "\n";
            return kExitConfig;
        }
        model = load_checkpoint<float>(ckpt_path, cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (fold) fold_model(model);

    Tensor<float> img;
    try {
        img = load_ppm(in_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    Tensor<float> sr = forward(model, img, Mode::infer);
    for (auto& v : sr.data) v = std::min(std::max(v, 0.0f), 1.0f);
    save_ppm(sr, out_path);
    std::cout << in_path << " (" << img.w << "x" << img.h << ") -> " << out_path << " (" << sr.w
              << "x" << sr.h << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

// crops an HR image to dimensions divisible by the scale, the standard
// protocol before synthesizing the LR counterpart
Tensor<float> modcrop(const Tensor<float>& img, int s) {
    const int h = img.h - img.h % s, w = img.w - img.w % s;
    if (h == img.h && w == img.w) return img;
    Tensor<float> out(img.n, img.c, h, w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(0, c, y, x) = img.at(0, c, y, x);
    return out;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir, int crop,
             const std::string& csv_path) {
    ModelConfig cfg;
    EswtModel<float> model;
    try {
        CheckpointReader rd(ckpt_path);
        cfg = read_config_entry(rd);
        model = load_checkpoint<float>(ckpt_path, cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    fold_model(model);
    const int s = cfg.sr_scale;
    if (crop < 0) crop = s;

    std::vector<fs::path> files;
    try {
        for (const auto& entry : fs::directory_iterator(dataset_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".ppm")
                files.push_back(entry.path());
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "config error: no .ppm images in " << dataset_dir << "\n";
        return kExitConfig;
    }

    std::ostringstream csv;
    csv << "image,psnr,psnr_is_inf,ssim,psnr_bicubic,psnr_bicubic_is_inf,ssim_bicubic\n";
    std::printf("%-24s %10s %8s %12s %10s\n", "image", "psnr", "ssim", "psnr_bicubic",
                "ssim_bic");
    double sum_p = 0, sum_s = 0, sum_bp = 0, sum_bs = 0;
    for (const auto& f : files) {
        Tensor<float> hr = modcrop(load_ppm(f.string()), s);
        Tensor<float> lr = degrade_bicubic(hr, s);
        Tensor<float> sr = forward(model, lr, Mode::infer);
        for (auto& v : sr.data) v = std::min(std::max(v, 0.0f), 1.0f);
        Tensor<float> bic = resize_bicubic(lr, hr.h, hr.w);
        for (auto& v : bic.data) v = std::min(std::max(v, 0.0f), 1.0f);

        Tensor<float> yh = rgb_to_y(hr), ys = rgb_to_y(sr), yb = rgb_to_y(bic);
        const double p = psnr(ys, yh, crop);
        const double sx = ssim(ys, yh);
        const double bp = psnr(yb, yh, crop);
        const double bs = ssim(yb, yh);
        bool p_inf = false, bp_inf = false;
        const double p_csv = psnr_for_csv(p, &p_inf);
        const double bp_csv = psnr_for_csv(bp, &bp_inf);
        sum_p += p_csv;
        sum_s += sx;
        sum_bp += bp_csv;
        sum_bs += bs;
        csv << f.filename().string() << "," << p_csv << "," << (p_inf ? 1 : 0) << "," << sx << ","
            << bp_csv << "," << (bp_inf ? 1 : 0) << "," << bs << "\n";
        std::printf("%-24s %10.4f %8.4f %12.4f %10.4f\n", f.filename().string().c_str(), p_csv,
                    sx, bp_csv, bs);
    }
    const double n = static_cast<double>(files.size());
    csv << "mean," << sum_p / n << ",," << sum_s / n << "," << sum_bp / n << ",," << sum_bs / n
        << "\n";
    std::printf("%-24s %10.4f %8.4f %12.4f %10.4f\n", "mean", sum_p / n, sum_s / n, sum_bp / n,
                sum_bs / n);

    if (!csv_path.empty()) {
        std::ofstream os(csv_path + ".tmp");
        os << csv.str();
        os.close();
        fs::rename(csv_path + ".tmp", csv_path);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

bool parse_input_size(const std::string& text, int* c, int* h, int* w) {
    const char* p = text.c_str();
    char sep1 = 0, sep2 = 0;
    return std::sscanf(p, "%d%c%d%c%d", c, &sep1, h, &sep2, w) == 5 && sep1 == 'x' && sep2 == 'x';
}

int cmd_profile(const std::string& config_path, const std::string& input_size, bool as_json,
                bool bench, const std::string& json_out) {
    RunConfig rc;
    try {
        rc = load_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    int c = 3, h = 256, w = 256;
    if (!input_size.empty() && !parse_input_size(input_size, &c, &h, &w)) {
        std::cerr << "config error: --input-size must look like 3x256x256\n";
        return kExitConfig;
    }
    if (c != rc.model.c_in) {
        std::cerr << "config error: input channels " << c << " != model c_in " << rc.model.c_in
                  << "\n";
        return kExitConfig;
    }

    ComplexityReport rep = count_flops(rc.model, h, w);
    EswtModel<float> model = init_model<float>(rc.model, 0);
    const std::uint64_t params_counted = count_params(model);
    if (params_counted != rep.params) {
        std::cerr << "internal error: analytic parameter walk (" << rep.params
                  << ") disagrees with the built model (" << params_counted << ")\n";
        return 1;
    }
    if (bench) {
        Rng rng = derive_rng(1, "profile-bench");
        Tensor<float> input = random_uniform<float>(1, c, h, w, rng, 0.0f, 1.0f);
        EswtModel<float> folded = model;
        fold_model(folded);
        LatencyResult lat = latency_bench(folded, input, 3, 1);
        rep.latency_mean_s = lat.mean_s;
        rep.latency_std_s = lat.std_s;
        rep.peak_alloc_bytes = lat.peak_alloc_bytes;
    }

    json j;
    j["input"] = {{"c", c}, {"h", h}, {"w", w}};
    j["params"] = rep.params;
    j["flops_conv_macs"] = rep.conv_macs;
    j["attn_macs"] = rep.attn_macs;
    j["total_macs"] = rep.total_macs;
    if (bench) {
        j["latency_mean_s"] = rep.latency_mean_s;
        j["latency_std_s"] = rep.latency_std_s;
        j["peak_alloc_bytes"] = rep.peak_alloc_bytes;
    }
    j["layers"] = json::array();
    for (const auto& l : rep.layers)
        j["layers"].push_back({{"name", l.name},
                               {"params", l.params},
                               {"conv_macs", l.conv_macs},
                               {"attn_macs", l.attn_macs}});

    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("input              %dx%dx%d\n", c, h, w);
        std::printf("params             %llu (%.1f K)\n",
                    static_cast<unsigned long long>(rep.params), rep.params / 1e3);
        std::printf("flops (conv MACs)  %llu (%.2f G)\n",
                    static_cast<unsigned long long>(rep.conv_macs), rep.conv_macs / 1e9);
        std::printf("attention MACs     %llu (%.2f G)\n",
                    static_cast<unsigned long long>(rep.attn_macs), rep.attn_macs / 1e9);
        std::printf("total MACs         %llu (%.2f G)\n",
                    static_cast<unsigned long long>(rep.total_macs), rep.total_macs / 1e9);
        if (bench) {
            std::printf("latency            %.3f s +- %.3f s\n", rep.latency_mean_s,
                        rep.latency_std_s);
            std::printf("peak alloc         %.1f MB\n", rep.peak_alloc_bytes / 1e6);
        }
        std::printf("%-16s %10s %14s %14s\n", "layer", "params", "conv_macs", "attn_macs");
        for (const auto& l : rep.layers)
            std::printf("%-16s %10llu %14llu %14llu\n", l.name.c_str(),
                        static_cast<unsigned long long>(l.params),
                        static_cast<unsigned long long>(l.conv_macs),
                        static_cast<unsigned long long>(l.attn_macs));
    }
    if (!json_out.empty()) {
        std::ofstream os(json_out + ".tmp");
        os << j.dump(2) << "\n";
        os.close();
        fs::rename(json_out + ".tmp", json_out);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench-window
// ---------------------------------------------------------------------------

int cmd_bench_window(const std::string& out_csv) {
    const std::vector<int> channels = {4, 8, 12};
    const std::vector<int> sizes = {8, 16};
    const std::vector<WindowSpec> windows = {WindowSpec(2, 2), WindowSpec(4, 1), WindowSpec(8, 2)};

    std::ostringstream csv;
    csv << "# units: omega_* and inst_* are multiply-accumulate counts; latency_*_ms is wall "
           "clock per forward in milliseconds\n";
    csv << "C,H,W,win_h,win_w,N,k,omega_shift,omega_strip,inst_shift,inst_strip,latency_shift_ms,"
           "latency_strip_ms\n";
    Rng rng = derive_rng(2024, "bench-window");
    bool all_ok = true;
    for (int C : channels)
        for (int hw : sizes)
            for (const auto& win : windows) {
                const int N = win.pixels();
                const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(N))));
                if (k * k != N || hw % win.h || hw % win.w || hw % k) continue;
                const std::uint64_t omega_shift = complexity_shift(C, hw, hw, k);
                const std::uint64_t omega_strip = complexity_strip(C, hw, hw, win.h, win.w);

                StripedBwsa<float> striped(C);
                FullWsa<float> full(C);
                Rng prng = derive_rng(300 + C * 100 + hw + N, "bench-params");
                auto fill = [&](Tensor<float>& t) {
                    for (auto& v : t.data) v = static_cast<float>(prng.uniform(-0.5, 0.5));
                };
                fill(striped.half0.q.w.value);
                fill(striped.half0.v.w.value);
                fill(striped.half1.q.w.value);
                fill(striped.half1.v.w.value);
                fill(striped.tail.w.value);
                fill(full.branch.q.w.value);
                fill(full.branch.v.w.value);
                fill(full.tail.w.value);
                Tensor<float> x = random_uniform<float>(1, C, hw, hw, rng);

                MacCounter::enable();
                striped_bwsa(x, striped, win, false, Mode::infer);
                const std::uint64_t inst_strip = MacCounter::disable();
                MacCounter::enable();
                full_wsa(x, full, WindowSpec(k, k), false, Mode::infer);
                full_wsa(x, full, WindowSpec(k, k), true, Mode::infer);
                const std::uint64_t inst_shift = MacCounter::disable();

                const auto time_ms = [&](auto&& fn) {
                    const auto t0 = std::chrono::steady_clock::now();
                    for (int i = 0; i < 10; ++i) fn();
                    const auto t1 = std::chrono::steady_clock::now();
                    return std::chrono::duration<double, std::milli>(t1 - t0).count() / 10.0;
                };
                const double lat_strip =
                    time_ms([&] { striped_bwsa(x, striped, win, false, Mode::infer); });
                const double lat_shift = time_ms([&] {
                    full_wsa(x, full, WindowSpec(k, k), false, Mode::infer);
                    full_wsa(x, full, WindowSpec(k, k), true, Mode::infer);
                });

                all_ok = all_ok && omega_strip < omega_shift && inst_strip == omega_strip &&
                         inst_shift == omega_shift;
                csv << C << "," << hw << "," << hw << "," << win.h << "," << win.w << "," << N
                    << "," << k << "," << omega_shift << "," << omega_strip << "," << inst_shift
                    << "," << inst_strip << "," << lat_shift << "," << lat_strip << "\n";
            }
    std::cout << csv.str();
    if (!out_csv.empty()) {
        std::ofstream os(out_csv + ".tmp");
        os << csv.str();
        os.close();
        fs::rename(out_csv + ".tmp", out_csv);
    }
    if (!all_ok) {
        std::cerr << "bench-window: instrumented counts diverged from the closed forms\n";
        return 1;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Efficient striped window transformer for single-image super-resolution"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume_path;
    auto* train = app.add_subcommand("train", "run the optimization loop");
    train->add_option("--config", config_path, "run configuration JSON")->required();
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    std::string ckpt, in_path, out_path;
    int scale = 0;
    bool no_fold = false;
    auto* infer = app.add_subcommand("infer", "super-resolve one PPM image");
    infer->add_option("--ckpt", ckpt, "model checkpoint")->required();
    infer->add_option("--in", in_path, "input PPM (P6)")->required();
    infer->add_option("--out", out_path, "output PPM")->required();
    infer->add_option("--scale", scale, "expected upscale factor (validated against the ckpt)");
    infer->add_flag("--no-fold", no_fold, "keep batch norms unfolded");

    std::string dataset_dir, eval_csv;
    int crop = -1;
    auto* eval = app.add_subcommand("eval", "PSNR/SSIM against a directory of HR images");
    eval->add_option("--ckpt", ckpt, "model checkpoint")->required();
    eval->add_option("--dataset", dataset_dir, "directory of HR .ppm images")->required();
    eval->add_option("--crop", crop, "border pixels to drop before PSNR (default: sr scale)");
    eval->add_option("--csv", eval_csv, "write per-image results to this CSV");

    std::string input_size = "3x256x256", json_out;
    bool as_json = false, bench = false;
    auto* profile = app.add_subcommand("profile", "parameter and FLOPs accounting");
    profile->add_option("--config", config_path, "run configuration JSON")->required();
    profile->add_option("--input-size", input_size, "input size as CxHxW (default 3x256x256)");
    profile->add_flag("--json", as_json, "print machine-readable JSON");
    profile->add_flag("--bench", bench, "also measure latency and peak allocation");
    profile->add_option("--json-out", json_out, "write the JSON report to this file");

    std::string bench_csv;
    auto* benchw = app.add_subcommand("bench-window", "striped vs shifted complexity grid");
    benchw->add_option("--out", bench_csv, "write the grid to this CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, out_dir, resume_path);
        if (infer->parsed()) return cmd_infer(ckpt, in_path, out_path, scale, !no_fold);
        if (eval->parsed()) return cmd_eval(ckpt, dataset_dir, crop, eval_csv);
        if (profile->parsed()) return cmd_profile(config_path, input_size, as_json, bench, json_out);
        if (benchw->parsed()) return cmd_bench_window(bench_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
