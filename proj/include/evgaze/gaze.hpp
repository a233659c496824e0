// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace evgaze {

/// Sentinel gap for queries outside the recorded track: always maskable.
inline constexpr std::int64_t kInfiniteGap = std::numeric_limits<std::int64_t>::max();

/// One gaze reference: 3D origin in mm plus two spherical angles in degrees.
/// (0°, 0°) means looking straight ahead.
struct GazeSample {
    std::int64_t t = 0;  // microseconds
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    double phi = 0.0;  // azimuth, degrees
    double psi = 0.0;  // elevation, degrees

    bool operator==(const GazeSample&) const = default;
};

/// Gaze samples with strictly increasing timestamps.
struct GazeTrack {
    std::vector<GazeSample> samples;

    std::int64_t t_first() const { return samples.front().t; }
    std::int64_t t_last() const { return samples.back().t; }

    bool operator==(const GazeTrack&) const = default;
};

/// Throws DataError unless timestamps are strictly increasing.
void validate_track(const GazeTrack& track);

struct InterpResult {
    GazeSample sample;
    std::int64_t gap_us = 0;  // time between the bracketing true samples; kInfiniteGap when clamped
};

/// Componentwise linear interpolation between the bracketing samples.
/// Queries outside [first, last] clamp to the nearest endpoint with an
/// infinite gap. Exact hits return the stored sample with gap 0.
InterpResult interpolate_at(const GazeTrack& track, std::int64_t t);

/// Per-frame regression target with its interpolation-gap bookkeeping.
struct AlignedTarget {
    GazeSample target;
    std::int64_t gap_us = 0;
    bool masked = false;  // true = excluded from loss and metrics
};

using AlignedTargets = std::vector<AlignedTarget>;

/// Angles (degrees) to a unit vector: (cos psi sin phi, sin psi, cos psi cos phi).
std::array<double, 3> spherical_to_unit(double phi_deg, double psi_deg);

/// Angle between the two gaze directions, degrees in [0, 180].
double angle_error(double pred_phi, double pred_psi, double true_phi, double true_psi);

/// Euclidean distance between origins, mm.
double pupil_error(const std::array<double, 3>& pred_origin, const std::array<double, 3>& truth_origin);

/// GazeTrack CSV: header `t_us,origin_x_mm,origin_y_mm,origin_z_mm,phi_deg,psi_deg`.
GazeTrack read_gaze_csv(const std::string& text);
std::string write_gaze_csv(const GazeTrack& track);
GazeTrack read_gaze_csv_file(const std::string& path);
void write_gaze_csv_file(const GazeTrack& track, const std::string& path);

}  // namespace evgaze
