// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "evgaze/errors.hpp"
#include "evgaze/rng.hpp"

namespace evgaze {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Linear scene intensities; log-intensity is what the sensor thresholds.
constexpr double kIntensityBackground = 1.0;
constexpr double kIntensityIris = 0.45;
constexpr double kIntensityPupil = 0.08;

constexpr std::int64_t kSaccadeDwellMinUs = 150'000;
constexpr std::int64_t kSaccadeDwellMaxUs = 400'000;
constexpr std::int64_t kSaccadeTransitionUs = 40'000;

void validate_config(const EyeSimConfig& c) {
    if (c.duration_us <= 0) throw ConfigError("simulator: duration must be > 0");
    if (c.sample_period_us <= 0) throw ConfigError("simulator: gaze sample period must be > 0");
    if (c.render_dt_us <= 0) throw ConfigError("simulator: render step must be > 0");
    if (c.pupil_radius_px <= 0 || c.iris_radius_px <= 0 || c.pupil_radius_px >= c.iris_radius_px)
        throw ConfigError("simulator: pupil radius must be positive and smaller than iris radius");
    if (c.contrast_threshold <= 0) throw ConfigError("simulator: contrast threshold must be > 0");
    if (c.width <= 0 || c.height <= 0) throw ConfigError("simulator: geometry must be positive");
    if (c.amplitude_deg < 0) throw ConfigError("simulator: amplitude must be >= 0");
    if (c.frequency_hz < 0) throw ConfigError("simulator: frequency must be >= 0");
    if (c.noise_level < 0) throw ConfigError("simulator: noise level must be >= 0");
}

// Piecewise plan for the random-saccade task: hold segments separated by
// short linear transitions. Regenerated deterministically from the seed.
struct SaccadeSegment {
    std::int64_t t0, t1;
    double phi0, psi0, phi1, psi1;
};

std::vector<SaccadeSegment> build_saccade_plan(const EyeSimConfig& c) {
    std::vector<SaccadeSegment> plan;
    Rng rng(Rng::derive(c.seed, 0xA5));
    double phi = 0.0, psi = 0.0;
    std::int64_t t = 0;
    while (t <= c.duration_us) {
        std::int64_t dwell = kSaccadeDwellMinUs +
                             static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(kSaccadeDwellMaxUs - kSaccadeDwellMinUs)));
        plan.push_back({t, t + dwell, phi, psi, phi, psi});
        t += dwell;
        double next_phi = rng.uniform(-c.amplitude_deg, c.amplitude_deg);
        double next_psi = rng.uniform(-c.amplitude_deg, c.amplitude_deg);
        plan.push_back({t, t + kSaccadeTransitionUs, phi, psi, next_phi, next_psi});
        t += kSaccadeTransitionUs;
        phi = next_phi;
        psi = next_psi;
    }
    return plan;
}

std::array<double, 2> saccade_angles(const std::vector<SaccadeSegment>& plan, std::int64_t t) {
    for (const auto& s : plan) {
        if (t < s.t1 || &s == &plan.back()) {
            if (s.t1 == s.t0) return {s.phi1, s.psi1};
            double w = std::clamp(static_cast<double>(t - s.t0) / static_cast<double>(s.t1 - s.t0), 0.0, 1.0);
            return {s.phi0 + w * (s.phi1 - s.phi0), s.psi0 + w * (s.psi1 - s.psi0)};
        }
    }
    return {0.0, 0.0};
}

class Renderer {
  public:
    explicit Renderer(const EyeSimConfig& c)
        : cfg_(c),
          log_ref_(static_cast<std::size_t>(c.width) * static_cast<std::size_t>(c.height), 0.0),
          log_bg_(std::log(kIntensityBackground)),
          log_iris_(std::log(kIntensityIris)),
          log_pupil_(std::log(kIntensityPupil)) {
        // Reference starts at the blank bright field, so the eye's first
        // appearance produces the onset transient.
        have_prev_ = false;
    }

    void render_step(std::int64_t t, double phi, double psi, std::vector<DvsEvent>& out) {
        double cx = 0.5 * (cfg_.width - 1) + cfg_.gain_px_per_deg * phi;
        double cy = 0.5 * (cfg_.height - 1) - cfg_.gain_px_per_deg * psi;
        int margin = static_cast<int>(cfg_.iris_radius_px) + 2;
        int x0 = static_cast<int>(std::floor(cx)) - margin;
        int x1 = static_cast<int>(std::ceil(cx)) + margin;
        int y0 = static_cast<int>(std::floor(cy)) - margin;
        int y1 = static_cast<int>(std::ceil(cy)) + margin;
        if (have_prev_) {
            x0 = std::min(x0, prev_x0_);
            x1 = std::max(x1, prev_x1_);
            y0 = std::min(y0, prev_y0_);
            y1 = std::max(y1, prev_y1_);
        }
        int bx0 = std::max(0, x0), bx1 = std::min(cfg_.width - 1, x1);
        int by0 = std::max(0, y0), by1 = std::min(cfg_.height - 1, y1);

        double rp2 = cfg_.pupil_radius_px * cfg_.pupil_radius_px;
        double ri2 = cfg_.iris_radius_px * cfg_.iris_radius_px;
        double thr = cfg_.contrast_threshold;
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                double dx = x - cx, dy = y - cy;
                double r2 = dx * dx + dy * dy;
                double L = r2 <= rp2 ? log_pupil_ : (r2 <= ri2 ? log_iris_ : log_bg_);
                double& ref = log_ref_[static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg_.width) + static_cast<std::size_t>(x)];
                while (L - ref >= thr) {
                    out.push_back({t, x, y, 1});
                    ref += thr;
                }
                while (ref - L >= thr) {
                    out.push_back({t, x, y, 0});
                    ref -= thr;
                }
            }
        }
        prev_x0_ = static_cast<int>(std::floor(cx)) - margin;
        prev_x1_ = static_cast<int>(std::ceil(cx)) + margin;
        prev_y0_ = static_cast<int>(std::floor(cy)) - margin;
        prev_y1_ = static_cast<int>(std::ceil(cy)) + margin;
        have_prev_ = true;
    }

  private:
    const EyeSimConfig& cfg_;
    std::vector<double> log_ref_;
    double log_bg_, log_iris_, log_pupil_;
    bool have_prev_ = false;
    int prev_x0_ = 0, prev_x1_ = 0, prev_y0_ = 0, prev_y1_ = 0;
};

}  // namespace

std::array<double, 2> eye_trajectory_angles(const EyeSimConfig& config, std::int64_t t_us) {
    double ts = static_cast<double>(t_us) * 1e-6;
    switch (config.task) {
        case EyeTask::fixation:
            return {0.0, 0.0};
        case EyeTask::smooth_pursuit: {
            double phi = config.amplitude_deg * std::sin(2.0 * kPi * config.frequency_hz * ts);
            double psi = 0.5 * config.amplitude_deg * std::sin(kPi * config.frequency_hz * ts);
            return {phi, psi};
        }
        case EyeTask::random_saccade: {
            auto plan = build_saccade_plan(config);
            return saccade_angles(plan, t_us);
        }
    }
    return {0.0, 0.0};
}

EyeSimResult simulate_eye(const EyeSimConfig& config) {
    validate_config(config);
    EyeSimResult res;
    res.events.geometry = {config.width, config.height};

    std::vector<SaccadeSegment> plan;
    if (config.task == EyeTask::random_saccade) plan = build_saccade_plan(config);
    auto angles_at = [&](std::int64_t t) -> std::array<double, 2> {
        if (config.task == EyeTask::random_saccade) return saccade_angles(plan, t);
        return eye_trajectory_angles(config, t);
    };

    Renderer renderer(config);
    for (std::int64_t t = 0; t <= config.duration_us; t += config.render_dt_us) {
        auto [phi, psi] = angles_at(t);
        renderer.render_step(t, phi, psi, res.events.events);
    }

    Rng noise_rng(Rng::derive(config.seed, 0x6E));
    for (std::int64_t t = 0; t <= config.duration_us; t += config.sample_period_us) {
        auto [phi, psi] = angles_at(t);
        GazeSample s;
        s.t = t;
        s.phi = phi;
        s.psi = psi;
        for (int k = 0; k < 3; ++k)
            s.origin[static_cast<std::size_t>(k)] = config.origin_mm[static_cast<std::size_t>(k)] +
                                                    (config.noise_level > 0 ? noise_rng.normal(0.0, config.noise_level) : 0.0);
        res.gaze.samples.push_back(s);
    }

    validate_stream(res.events);
    validate_track(res.gaze);
    return res;
}

}  // namespace evgaze
