// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/config.hpp"

#include <fstream>
#include <set>

namespace evgaze {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: section '" + where + "' must be an object");
    for (auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("config: unknown key '" + where + "." + key + "'");
}

EyeTask task_from_name(const std::string& s) {
    if (s == "smooth_pursuit") return EyeTask::smooth_pursuit;
    if (s == "random_saccade") return EyeTask::random_saccade;
    if (s == "fixation") return EyeTask::fixation;
    throw ConfigError("config: unknown simulator task '" + s + "'");
}
std::string task_name(EyeTask t) {
    switch (t) {
        case EyeTask::smooth_pursuit: return "smooth_pursuit";
        case EyeTask::random_saccade: return "random_saccade";
        case EyeTask::fixation: return "fixation";
    }
    return "smooth_pursuit";
}

FramingMethod framing_method_from_name(const std::string& s) {
    if (s == "count") return FramingMethod::count;
    if (s == "window") return FramingMethod::window;
    throw ConfigError("config: unknown framing method '" + s + "' (expected count or window)");
}
std::string framing_method_name(FramingMethod m) { return m == FramingMethod::count ? "count" : "window"; }

TrainMethod train_method_from_name(const std::string& s) {
    if (s == "tbptt") return TrainMethod::tbptt;
    if (s == "fptt") return TrainMethod::fptt;
    if (s == "fptt_tbptt") return TrainMethod::fptt_tbptt;
    throw ConfigError("config: unknown training method '" + s + "'");
}
std::string train_method_name(TrainMethod m) {
    switch (m) {
        case TrainMethod::tbptt: return "tbptt";
        case TrainMethod::fptt: return "fptt";
        case TrainMethod::fptt_tbptt: return "fptt_tbptt";
    }
    return "fptt";
}

EyeSimConfig simulator_from_json(const json& j) {
    reject_unknown(j, {"task", "duration_us", "seed", "width", "height", "pupil_radius_px", "iris_radius_px",
                       "contrast_threshold", "amplitude_deg", "frequency_hz", "sample_period_us", "noise_level",
                       "render_dt_us", "gain_px_per_deg", "origin_mm"},
                   "simulator");
    EyeSimConfig c;
    if (j.contains("task")) c.task = task_from_name(j["task"]);
    if (j.contains("duration_us")) c.duration_us = j["duration_us"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("width")) c.width = j["width"];
    if (j.contains("height")) c.height = j["height"];
    if (j.contains("pupil_radius_px")) c.pupil_radius_px = j["pupil_radius_px"];
    if (j.contains("iris_radius_px")) c.iris_radius_px = j["iris_radius_px"];
    if (j.contains("contrast_threshold")) c.contrast_threshold = j["contrast_threshold"];
    if (j.contains("amplitude_deg")) c.amplitude_deg = j["amplitude_deg"];
    if (j.contains("frequency_hz")) c.frequency_hz = j["frequency_hz"];
    if (j.contains("sample_period_us")) c.sample_period_us = j["sample_period_us"];
    if (j.contains("noise_level")) c.noise_level = j["noise_level"];
    if (j.contains("render_dt_us")) c.render_dt_us = j["render_dt_us"];
    if (j.contains("gain_px_per_deg")) c.gain_px_per_deg = j["gain_px_per_deg"];
    if (j.contains("origin_mm")) {
        auto v = j["origin_mm"].get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("config: simulator.origin_mm must have 3 components");
        c.origin_mm = {v[0], v[1], v[2]};
    }
    return c;
}

json simulator_to_json(const EyeSimConfig& c) {
    json j;
    j["task"] = task_name(c.task);
    j["duration_us"] = c.duration_us;
    j["seed"] = c.seed;
    j["width"] = c.width;
    j["height"] = c.height;
    j["pupil_radius_px"] = c.pupil_radius_px;
    j["iris_radius_px"] = c.iris_radius_px;
    j["contrast_threshold"] = c.contrast_threshold;
    j["amplitude_deg"] = c.amplitude_deg;
    j["frequency_hz"] = c.frequency_hz;
    j["sample_period_us"] = c.sample_period_us;
    j["noise_level"] = c.noise_level;
    j["render_dt_us"] = c.render_dt_us;
    j["gain_px_per_deg"] = c.gain_px_per_deg;
    j["origin_mm"] = std::vector<double>{c.origin_mm[0], c.origin_mm[1], c.origin_mm[2]};
    return j;
}

FramingSection framing_from_json(const json& j) {
    reject_unknown(j, {"method", "value", "downscale", "binarize", "chunk_len", "ratios"}, "framing");
    FramingSection c;
    if (j.contains("method")) c.method = framing_method_from_name(j["method"]);
    if (j.contains("value")) c.value = j["value"];
    if (j.contains("downscale")) c.downscale = j["downscale"];
    if (j.contains("binarize")) c.binarize = j["binarize"];
    if (j.contains("chunk_len")) c.chunk_len = j["chunk_len"];
    if (j.contains("ratios")) {
        auto v = j["ratios"].get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("config: framing.ratios must be [train, validation, test]");
        c.ratios = {v[0], v[1], v[2]};
    }
    if (c.value < 1) throw ConfigError("config: framing.value must be >= 1");
    if (c.downscale < 1) throw ConfigError("config: framing.downscale must be >= 1");
    if (c.chunk_len < 1) throw ConfigError("config: framing.chunk_len must be >= 1");
    return c;
}

json framing_to_json(const FramingSection& c) {
    json j;
    j["method"] = framing_method_name(c.method);
    j["value"] = c.value;
    j["downscale"] = c.downscale;
    j["binarize"] = c.binarize;
    j["chunk_len"] = c.chunk_len;
    j["ratios"] = std::vector<double>{c.ratios.train, c.ratios.validation, c.ratios.test};
    return j;
}

TrainConfig training_from_json(const json& j) {
    reject_unknown(j, {"method", "bptt_steps", "alpha", "lr", "momentum", "epochs", "batch", "seed", "lambda_p",
                       "lambda_a", "max_updates"},
                   "training");
    TrainConfig c;
    if (j.contains("method")) c.method = train_method_from_name(j["method"]);
    if (j.contains("bptt_steps")) c.bptt_steps = j["bptt_steps"];
    if (j.contains("alpha")) c.alpha = j["alpha"];
    if (j.contains("lr")) c.lr = j["lr"];
    if (j.contains("momentum")) c.momentum = j["momentum"];
    if (j.contains("epochs")) c.epochs = j["epochs"];
    if (j.contains("batch")) c.batch = j["batch"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("lambda_p")) c.loss.lambda_p = j["lambda_p"];
    if (j.contains("lambda_a")) c.loss.lambda_a = j["lambda_a"];
    if (j.contains("max_updates")) c.max_updates = j["max_updates"];
    validate_train_config(c);
    return c;
}

json training_to_json(const TrainConfig& c) {
    json j;
    j["method"] = train_method_name(c.method);
    j["bptt_steps"] = c.bptt_steps;
    j["alpha"] = c.alpha;
    j["lr"] = c.lr;
    j["momentum"] = c.momentum;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch;
    j["seed"] = c.seed;
    j["lambda_p"] = c.loss.lambda_p;
    j["lambda_a"] = c.loss.lambda_a;
    j["max_updates"] = c.max_updates;
    return j;
}

IoSection io_from_json(const json& j) {
    reject_unknown(j, {"events_path", "gaze_path", "frames_path", "checkpoint_path", "metrics_path",
                       "predictions_path", "results_path", "events_format"},
                   "io");
    IoSection c;
    if (j.contains("events_path")) c.events_path = j["events_path"];
    if (j.contains("gaze_path")) c.gaze_path = j["gaze_path"];
    if (j.contains("frames_path") && !j["frames_path"].is_null()) c.frames_path = j["frames_path"].get<std::string>();
    if (j.contains("checkpoint_path")) c.checkpoint_path = j["checkpoint_path"];
    if (j.contains("metrics_path")) c.metrics_path = j["metrics_path"];
    if (j.contains("predictions_path")) c.predictions_path = j["predictions_path"];
    if (j.contains("results_path")) c.results_path = j["results_path"];
    if (j.contains("events_format")) {
        std::string f = j["events_format"];
        if (f == "csv")
            c.events_format = EventFormat::csv;
        else if (f == "binary")
            c.events_format = EventFormat::binary;
        else
            throw ConfigError("config: io.events_format must be csv or binary");
    }
    return c;
}

json io_to_json(const IoSection& c) {
    json j;
    j["events_path"] = c.events_path;
    j["gaze_path"] = c.gaze_path;
    j["frames_path"] = c.frames_path.has_value() ? json(*c.frames_path) : json(nullptr);
    j["checkpoint_path"] = c.checkpoint_path;
    j["metrics_path"] = c.metrics_path;
    j["predictions_path"] = c.predictions_path;
    j["results_path"] = c.results_path;
    j["events_format"] = c.events_format == EventFormat::csv ? "csv" : "binary";
    return j;
}

GridSection grid_from_json(const json& j) {
    reject_unknown(j, {"neuron", "framing", "bptt_steps", "fptt", "mask_threshold_us", "full_size"}, "grid");
    GridSection c;
    if (j.contains("neuron")) {
        c.neuron.clear();
        for (const auto& v : j["neuron"]) c.neuron.push_back(neuron_type_from_name(v));
    }
    if (j.contains("framing")) {
        c.framing.clear();
        for (const auto& v : j["framing"]) {
            reject_unknown(v, {"method", "value"}, "grid.framing");
            GridFraming g;
            if (v.contains("method")) g.method = framing_method_from_name(v["method"]);
            if (v.contains("value")) g.value = v["value"];
            c.framing.push_back(g);
        }
    }
    if (j.contains("bptt_steps")) c.bptt_steps = j["bptt_steps"].get<std::vector<int>>();
    if (j.contains("fptt")) c.fptt = j["fptt"].get<std::vector<bool>>();
    if (j.contains("mask_threshold_us")) {
        c.mask_threshold_us.clear();
        for (const auto& v : j["mask_threshold_us"])
            c.mask_threshold_us.push_back(v.is_null() ? std::optional<std::int64_t>{}
                                                      : std::optional<std::int64_t>{v.get<std::int64_t>()});
    }
    if (j.contains("full_size")) c.full_size = j["full_size"].get<std::vector<bool>>();
    if (c.neuron.empty() || c.framing.empty() || c.bptt_steps.empty() || c.fptt.empty() ||
        c.mask_threshold_us.empty() || c.full_size.empty())
        throw ConfigError("config: grid axes must be non-empty");
    return c;
}

json grid_to_json(const GridSection& c) {
    json j;
    j["neuron"] = json::array();
    for (auto n : c.neuron) j["neuron"].push_back(neuron_type_name(n));
    j["framing"] = json::array();
    for (const auto& f : c.framing) j["framing"].push_back({{"method", framing_method_name(f.method)}, {"value", f.value}});
    j["bptt_steps"] = c.bptt_steps;
    j["fptt"] = c.fptt;
    j["mask_threshold_us"] = json::array();
    for (const auto& m : c.mask_threshold_us) j["mask_threshold_us"].push_back(m.has_value() ? json(*m) : json(nullptr));
    j["full_size"] = c.full_size;
    return j;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
    reject_unknown(j, {"seed", "precision", "simulator", "framing", "references", "model", "training", "io", "grid"},
                   "<root>");
    RunConfig c;
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("precision")) {
        std::string p = j["precision"];
        if (p == "f32")
            c.precision = Precision::f32;
        else if (p == "f64")
            c.precision = Precision::f64;
        else
            throw ConfigError("config: precision must be f32 or f64");
    }
    if (j.contains("simulator")) c.simulator = simulator_from_json(j["simulator"]);
    if (j.contains("framing")) c.framing = framing_from_json(j["framing"]);
    if (j.contains("references")) {
        reject_unknown(j["references"], {"mask_threshold_us"}, "references");
        if (j["references"].contains("mask_threshold_us") && !j["references"]["mask_threshold_us"].is_null())
            c.references.mask_threshold_us = j["references"]["mask_threshold_us"].get<std::int64_t>();
    }
    if (j.contains("model")) c.model = model_config_from_json(j["model"]);
    if (j.contains("training")) c.training = training_from_json(j["training"]);
    if (j.contains("io")) c.io = io_from_json(j["io"]);
    if (j.contains("grid")) c.grid = grid_from_json(j["grid"]);

    // Sub-seeds default to the top-level seed unless set explicitly.
    if (!j.contains("simulator") || !j["simulator"].contains("seed")) c.simulator.seed = c.seed;
    if (!j.contains("model") || !j["model"].contains("init_seed")) c.model.init_seed = c.seed;
    if (!j.contains("training") || !j["training"].contains("seed")) c.training.seed = c.seed;
    return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["precision"] = c.precision == Precision::f32 ? "f32" : "f64";
    j["simulator"] = simulator_to_json(c.simulator);
    j["framing"] = framing_to_json(c.framing);
    j["references"]["mask_threshold_us"] =
        c.references.mask_threshold_us.has_value() ? nlohmann::json(*c.references.mask_threshold_us) : nlohmann::json(nullptr);
    j["model"] = model_config_to_json(c.model);
    j["training"] = training_to_json(c.training);
    j["io"] = io_to_json(c.io);
    j["grid"] = grid_to_json(c.grid);
    return j;
}

RunConfig default_run_config() { return run_config_from_json(nlohmann::json::object()); }

RunConfig load_run_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    std::string path = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;  // bare string
    }
    nlohmann::json* cur = &doc;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("--set path has an empty segment: '" + path + "'");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

}  // namespace evgaze
