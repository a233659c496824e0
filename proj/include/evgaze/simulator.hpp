// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "evgaze/events.hpp"
#include "evgaze/gaze.hpp"

namespace evgaze {

enum class EyeTask { smooth_pursuit, random_saccade, fixation };

/// Configuration for the synthetic eye renderer. The scene is a dark pupil
/// disc inside an iris disc on a bright sclera; per-pixel log-intensity
/// threshold crossings emit DVS events.
struct EyeSimConfig {
    EyeTask task = EyeTask::smooth_pursuit;
    std::int64_t duration_us = 1'000'000;
    std::uint64_t seed = 1;
    int width = 346;
    int height = 260;
    double pupil_radius_px = 30.0;
    double iris_radius_px = 70.0;
    double contrast_threshold = 0.25;  // log-intensity units
    double amplitude_deg = 10.0;
    double frequency_hz = 0.5;
    std::int64_t sample_period_us = 10'000;  // 100 Hz gaze reference rate
    double noise_level = 0.0;                // stddev of origin noise, mm
    std::int64_t render_dt_us = 1'000;
    double gain_px_per_deg = 4.0;  // pupil-position / gaze-angle mapping
    std::array<double, 3> origin_mm{0.0, 0.0, 25.0};
};

struct EyeSimResult {
    EventStream events;
    GazeTrack gaze;
};

/// Renders the configured trajectory and emits events plus ground-truth gaze
/// samples at the configured period. Pure function of its config.
EyeSimResult simulate_eye(const EyeSimConfig& config);

/// Analytic trajectory angles (degrees) at time t for the given config; the
/// same function drives both rendering and the emitted gaze samples.
std::array<double, 2> eye_trajectory_angles(const EyeSimConfig& config, std::int64_t t_us);

}  // namespace evgaze
