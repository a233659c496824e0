// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evgaze/events.hpp"
#include "evgaze/gaze.hpp"

namespace evgaze {

/// 2-channel event-count grid (channel 0 = positive polarity, 1 = negative),
/// channel-major row-major, dimensions height x width per channel.
struct Frame {
    std::vector<std::uint16_t> data;
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;
    std::int64_t t_ref = 0;  // alignment timestamp: last event / window end

    bool operator==(const Frame&) const = default;
};

enum class FramingMethod { count, window };

struct FramingDescriptor {
    FramingMethod method = FramingMethod::count;
    std::int64_t value = 300;  // events per frame, or window length in us

    bool operator==(const FramingDescriptor&) const = default;
};

struct FrameSequence {
    std::vector<Frame> frames;
    FramingDescriptor descriptor;
    int width = 346;
    int height = 260;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool operator==(const FrameSequence&) const = default;
};

std::uint64_t frame_event_sum(const Frame& f);

/// Consecutive non-overlapping groups of exactly n events; the trailing
/// remainder is dropped. t_ref is the frame's last event timestamp.
FrameSequence frame_by_count(const EventStream& stream, std::int64_t n);

/// Contiguous windows [k*dt, (k+1)*dt) starting at the first event's
/// timestamp; empty windows yield all-zero frames. t_ref is the window end.
FrameSequence frame_by_window(const EventStream& stream, std::int64_t dt);

/// factor x factor sum pooling per channel; odd remainders truncate the last
/// rows/columns.
Frame downscale(const Frame& frame, int width, int height, int factor);
FrameSequence downscale(const FrameSequence& seq, int factor);

/// One target per frame, interpolated at t_ref. With a threshold, targets
/// whose bracketing-sample gap exceeds it are masked; without one nothing is.
AlignedTargets align_targets(const FrameSequence& frames, const GazeTrack& track,
                             std::optional<std::int64_t> mask_threshold_us);

/// A contiguous run of frames with their targets; the unit the splitter deals.
struct SequenceChunk {
    std::vector<Frame> frames;
    AlignedTargets targets;
};

struct DatasetSplit {
    std::vector<SequenceChunk> train;
    std::vector<SequenceChunk> validation;
    std::vector<SequenceChunk> test;
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
};

struct SplitRatios {
    double train = 0.7;
    double validation = 0.15;
    double test = 0.15;
};

/// Non-overlapping chunks of exactly chunk_len frames (trailing partial chunk
/// dropped), assigned to splits by a seeded Fisher-Yates shuffle.
DatasetSplit chunk_and_split(const FrameSequence& seq, const AlignedTargets& targets, std::int64_t chunk_len,
                             SplitRatios ratios, std::uint64_t seed);

/// FRSQ frame-cache container.
std::string write_frame_cache(const FrameSequence& seq);
FrameSequence read_frame_cache(const std::string& bytes);
void write_frame_cache_file(const FrameSequence& seq, const std::string& path);
FrameSequence read_frame_cache_file(const std::string& path);

}  // namespace evgaze
