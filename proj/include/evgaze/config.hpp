// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evgaze/framing.hpp"
#include "evgaze/model_config.hpp"
#include "evgaze/simulator.hpp"
#include "evgaze/training.hpp"

namespace evgaze {

struct FramingSection {
    FramingMethod method = FramingMethod::count;
    std::int64_t value = 300;
    int downscale = 2;
    bool binarize = false;
    std::int64_t chunk_len = 1000;
    SplitRatios ratios;
};

struct ReferencesSection {
    std::optional<std::int64_t> mask_threshold_us;  // null = keep everything
};

struct IoSection {
    std::string events_path = "events.csv";
    std::string gaze_path = "gaze.csv";
    std::optional<std::string> frames_path;  // optional FRSQ cache
    std::string checkpoint_path = "model.gsc";
    std::string metrics_path = "metrics.csv";
    std::string predictions_path = "predictions.csv";
    std::string results_path = "results.csv";
    EventFormat events_format = EventFormat::csv;
};

struct GridFraming {
    FramingMethod method = FramingMethod::count;
    std::int64_t value = 300;
};

struct GridSection {
    std::vector<NeuronType> neuron{NeuronType::alif};
    std::vector<GridFraming> framing{GridFraming{}};
    std::vector<int> bptt_steps{8};
    std::vector<bool> fptt{true};
    std::vector<std::optional<std::int64_t>> mask_threshold_us{std::nullopt};
    std::vector<bool> full_size{false};
};

enum class Precision { f32, f64 };

/// One document drives every command; unknown keys are rejected and all
/// defaults are materialized back out for provenance.
struct RunConfig {
    std::uint64_t seed = 42;
    Precision precision = Precision::f32;
    EyeSimConfig simulator;
    FramingSection framing;
    ReferencesSection references;
    ModelConfig model;
    TrainConfig training;
    IoSection io;
    GridSection grid;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

RunConfig load_run_config_file(const std::string& path);
RunConfig default_run_config();

/// Apply a `--set section.key=value` override; the value is parsed as JSON
/// with a bare-string fallback.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace evgaze
