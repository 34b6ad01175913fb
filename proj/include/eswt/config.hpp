#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "eswt/model.hpp"
#include "eswt/training.hpp"

namespace eswt {

// JSON run configuration shared by the command-line tools. Validation is
// strict: unknown keys anywhere are rejected with the offending field path.

struct SynthSpec {
    int count = 32;
    int size = 64;
    std::uint64_t seed = 7;
};

struct DataConfig {
    std::string source = "synth";  // "synth" | "dir"
    std::string path;
    SynthSpec synth;
};

struct EvalConfig {
    int crop = -1;  // -1 means sr_scale
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    EvalConfig eval;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& path,
                         const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(path + "." + it.key() + ": unknown key");
}

template <typename V>
V get_or(const json& j, const std::string& path, const char* key, V fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<V>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

inline WindowSpec parse_window(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ConfigError(path + ": window must be [h, w]");
    try {
        return WindowSpec(j[0].get<int>(), j[1].get<int>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline ModelConfig parse_model(const json& j, const std::string& path) {
    require_keys(j, path,
                 {"c_in", "channels", "n_blocks", "m_layers", "sr_scale", "window", "mlp_ratio",
                  "block_residual", "literal_attention_scale"});
    ModelConfig m;
    m.c_in = get_or(j, path, "c_in", m.c_in);
    m.channels = get_or(j, path, "channels", m.channels);
    m.n_blocks = get_or(j, path, "n_blocks", m.n_blocks);
    m.m_layers = get_or(j, path, "m_layers", m.m_layers);
    m.sr_scale = get_or(j, path, "sr_scale", m.sr_scale);
    if (j.contains("window")) m.window = parse_window(j.at("window"), path + ".window");
    m.mlp_ratio = get_or(j, path, "mlp_ratio", m.mlp_ratio);
    m.block_residual = get_or(j, path, "block_residual", m.block_residual);
    m.attention.literal_scale_after_softmax =
        get_or(j, path, "literal_attention_scale", m.attention.literal_scale_after_softmax);
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return m;
}

inline TrainConfig parse_train(const json& j, const std::string& path, int sr_scale,
                               const WindowSpec& default_window) {
    require_keys(j, path,
                 {"iters", "batch", "patch", "seed", "stages", "adam", "augment", "reset_adam"});
    TrainConfig t;
    t.sr_scale = sr_scale;
    t.stages = {StageSpec{1.0, default_window, 5e-4, 5e-6}};
    t.total_iters = get_or(j, path, "iters", t.total_iters);
    t.batch_size = get_or(j, path, "batch", t.batch_size);
    t.lr_patch = get_or(j, path, "patch", t.lr_patch);
    t.seed = get_or<std::uint64_t>(j, path, "seed", t.seed);
    t.augment = get_or(j, path, "augment", t.augment);
    t.reset_adam_per_stage = get_or(j, path, "reset_adam", t.reset_adam_per_stage);
    if (j.contains("adam")) {
        const json& a = j.at("adam");
        const std::string ap = path + ".adam";
        require_keys(a, ap, {"beta1", "beta2", "eps"});
        t.adam.beta1 = get_or(a, ap, "beta1", t.adam.beta1);
        t.adam.beta2 = get_or(a, ap, "beta2", t.adam.beta2);
        t.adam.eps = get_or(a, ap, "eps", t.adam.eps);
    }
    if (j.contains("stages")) {
        const json& st = j.at("stages");
        if (!st.is_array() || st.empty())
            throw ConfigError(path + ".stages: expected a non-empty array");
        t.stages.clear();
        for (std::size_t i = 0; i < st.size(); ++i) {
            const std::string sp = path + ".stages[" + std::to_string(i) + "]";
            require_keys(st[i], sp, {"fraction", "window", "lr_start", "lr_end"});
            StageSpec s;
            s.fraction = get_or(st[i], sp, "fraction", s.fraction);
            if (!st[i].contains("window")) throw ConfigError(sp + ".window: required");
            s.window = parse_window(st[i].at("window"), sp + ".window");
            s.lr_start = get_or(st[i], sp, "lr_start", s.lr_start);
            s.lr_end = get_or(st[i], sp, "lr_end", s.lr_end);
            t.stages.push_back(s);
        }
    }
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return t;
}

inline DataConfig parse_data(const json& j, const std::string& path) {
    require_keys(j, path, {"source", "path", "synth"});
    DataConfig d;
    d.source = get_or<std::string>(j, path, "source", d.source);
    if (d.source != "synth" && d.source != "dir")
        throw ConfigError(path + ".source: must be \"synth\" or \"dir\"");
    d.path = get_or<std::string>(j, path, "path", d.path);
    if (d.source == "dir" && d.path.empty()) throw ConfigError(path + ".path: required for dir source");
    if (j.contains("synth")) {
        const json& s = j.at("synth");
        const std::string sp = path + ".synth";
        require_keys(s, sp, {"count", "size", "seed"});
        d.synth.count = get_or(s, sp, "count", d.synth.count);
        d.synth.size = get_or(s, sp, "size", d.synth.size);
        d.synth.seed = get_or<std::uint64_t>(s, sp, "seed", d.synth.seed);
        if (d.synth.count < 1 || d.synth.size < 8) throw ConfigError(sp + ": bad synth corpus spec");
    }
    return d;
}

}  // namespace cfgdetail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using cfgdetail::require_keys;
    require_keys(j, "config", {"model", "train", "data", "eval"});
    RunConfig rc;
    if (j.contains("model")) rc.model = cfgdetail::parse_model(j.at("model"), "model");
    // absent stages mean a single stage over the whole run at the model window
    rc.train.stages = {StageSpec{1.0, rc.model.window, 5e-4, 5e-6}};
    if (j.contains("train"))
        rc.train = cfgdetail::parse_train(j.at("train"), "train", rc.model.sr_scale, rc.model.window);
    if (j.contains("data")) rc.data = cfgdetail::parse_data(j.at("data"), "data");
    if (j.contains("eval")) {
        cfgdetail::require_keys(j.at("eval"), "eval", {"crop"});
        rc.eval.crop = cfgdetail::get_or(j.at("eval"), "eval", "crop", rc.eval.crop);
    }
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_run_config(j);
}

}  // namespace eswt
