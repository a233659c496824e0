// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/framing.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "evgaze/errors.hpp"
#include "evgaze/rng.hpp"

namespace evgaze {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void bump_count(Frame& f, std::size_t idx) {
    if (f.data[idx] == 0xffff) throw DataError("frame pixel count overflows 16 bits");
    ++f.data[idx];
}

Frame make_empty_frame(std::size_t pixels) {
    Frame f;
    f.data.assign(2 * pixels, 0);
    return f;
}

void add_event_to_frame(Frame& f, const DvsEvent& e, int width, std::size_t pixels) {
    // Channel 0 positive, channel 1 negative.
    std::size_t chan = e.p == 1 ? 0 : 1;
    std::size_t idx = chan * pixels + static_cast<std::size_t>(e.y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(e.x);
    bump_count(f, idx);
}

}  // namespace

std::uint64_t frame_event_sum(const Frame& f) {
    std::uint64_t s = 0;
    for (std::uint16_t v : f.data) s += v;
    return s;
}

FrameSequence frame_by_count(const EventStream& stream, std::int64_t n) {
    if (n < 1) throw ConfigError("frame_by_count: n must be >= 1");
    FrameSequence seq;
    seq.descriptor = {FramingMethod::count, n};
    seq.width = stream.geometry.width;
    seq.height = stream.geometry.height;
    std::size_t pixels = seq.pixel_count();
    std::size_t full_frames = stream.events.size() / static_cast<std::size_t>(n);
    seq.frames.reserve(full_frames);
    for (std::size_t k = 0; k < full_frames; ++k) {
        Frame f = make_empty_frame(pixels);
        std::size_t begin = k * static_cast<std::size_t>(n);
        std::size_t end = begin + static_cast<std::size_t>(n);
        f.t_start = stream.events[begin].t;
        f.t_end = stream.events[end - 1].t;
        f.t_ref = f.t_end;
        for (std::size_t i = begin; i < end; ++i) add_event_to_frame(f, stream.events[i], seq.width, pixels);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

FrameSequence frame_by_window(const EventStream& stream, std::int64_t dt) {
    if (dt < 1) throw ConfigError("frame_by_window: dt must be >= 1");
    FrameSequence seq;
    seq.descriptor = {FramingMethod::window, dt};
    seq.width = stream.geometry.width;
    seq.height = stream.geometry.height;
    if (stream.events.empty()) return seq;
    std::size_t pixels = seq.pixel_count();
    std::int64_t t0 = stream.events.front().t;
    std::int64_t t_last = stream.events.back().t;
    std::int64_t windows = (t_last - t0) / dt + 1;
    seq.frames.reserve(static_cast<std::size_t>(windows));
    std::size_t i = 0;
    for (std::int64_t k = 0; k < windows; ++k) {
        Frame f = make_empty_frame(pixels);
        f.t_start = t0 + k * dt;
        f.t_end = t0 + (k + 1) * dt;
        f.t_ref = f.t_end;
        while (i < stream.events.size() && stream.events[i].t < f.t_end) {
            add_event_to_frame(f, stream.events[i], seq.width, pixels);
            ++i;
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

Frame downscale(const Frame& frame, int width, int height, int factor) {
    if (factor < 1) throw ConfigError("downscale: factor must be >= 1");
    if (factor == 1) return frame;
    int ow = width / factor;
    int oh = height / factor;
    std::size_t in_pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::size_t out_pixels = static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh);
    Frame out;
    out.t_start = frame.t_start;
    out.t_end = frame.t_end;
    out.t_ref = frame.t_ref;
    out.data.assign(2 * out_pixels, 0);
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < oh * factor; ++y) {
            for (int x = 0; x < ow * factor; ++x) {
                std::uint16_t v = frame.data[static_cast<std::size_t>(c) * in_pixels + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
                if (v == 0) continue;
                std::size_t oi = static_cast<std::size_t>(c) * out_pixels + static_cast<std::size_t>(y / factor) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x / factor);
                std::uint32_t sum = static_cast<std::uint32_t>(out.data[oi]) + v;
                if (sum > 0xffff) throw DataError("downscale: pooled count overflows 16 bits");
                out.data[oi] = static_cast<std::uint16_t>(sum);
            }
        }
    }
    return out;
}

FrameSequence downscale(const FrameSequence& seq, int factor) {
    if (factor < 1) throw ConfigError("downscale: factor must be >= 1");
    if (factor == 1) return seq;
    FrameSequence out;
    out.descriptor = seq.descriptor;
    out.width = seq.width / factor;
    out.height = seq.height / factor;
    out.frames.reserve(seq.frames.size());
    for (const Frame& f : seq.frames) out.frames.push_back(downscale(f, seq.width, seq.height, factor));
    return out;
}

AlignedTargets align_targets(const FrameSequence& frames, const GazeTrack& track,
                             std::optional<std::int64_t> mask_threshold_us) {
    if (track.samples.empty()) throw DataError("align_targets: empty gaze track");
    if (!frames.frames.empty()) {
        std::int64_t f_lo = frames.frames.front().t_ref;
        std::int64_t f_hi = frames.frames.back().t_ref;
        if (f_hi < track.t_first() || f_lo > track.t_last())
            throw DataError("align_targets: frame and gaze time ranges are disjoint");
    }
    AlignedTargets out;
    out.reserve(frames.frames.size());
    for (const Frame& f : frames.frames) {
        InterpResult r = interpolate_at(track, f.t_ref);
        AlignedTarget t;
        t.target = r.sample;
        t.gap_us = r.gap_us;
        t.masked = mask_threshold_us.has_value() && r.gap_us > *mask_threshold_us;
        out.push_back(t);
    }
    return out;
}

DatasetSplit chunk_and_split(const FrameSequence& seq, const AlignedTargets& targets, std::int64_t chunk_len,
                             SplitRatios ratios, std::uint64_t seed) {
    if (chunk_len < 1) throw ConfigError("chunk_and_split: chunk_len must be >= 1");
    double rsum = ratios.train + ratios.validation + ratios.test;
    if (rsum < 1.0 - 1e-9 || rsum > 1.0 + 1e-9) throw ConfigError("chunk_and_split: ratios must sum to 1");
    if (targets.size() != seq.frames.size())
        throw DataError("chunk_and_split: targets length does not match frame count");
    std::size_t n_chunks = seq.frames.size() / static_cast<std::size_t>(chunk_len);
    if (n_chunks == 0) throw DataError("chunk_and_split: fewer than one full chunk");

    std::vector<SequenceChunk> chunks(n_chunks);
    for (std::size_t k = 0; k < n_chunks; ++k) {
        std::size_t begin = k * static_cast<std::size_t>(chunk_len);
        std::size_t end = begin + static_cast<std::size_t>(chunk_len);
        chunks[k].frames.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                                seq.frames.begin() + static_cast<std::ptrdiff_t>(end));
        chunks[k].targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                                 targets.begin() + static_cast<std::ptrdiff_t>(end));
    }

    // Hand-rolled Fisher-Yates: std::shuffle's draw pattern is
    // implementation-defined and the assignment must be stable per seed.
    std::vector<std::size_t> order(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = n_chunks - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
        std::swap(order[i], order[j]);
    }

    std::size_t n_val = static_cast<std::size_t>(static_cast<double>(n_chunks) * ratios.validation);
    std::size_t n_test = static_cast<std::size_t>(static_cast<double>(n_chunks) * ratios.test);
    std::size_t n_train = n_chunks - n_val - n_test;

    DatasetSplit split;
    split.seed = seed;
    split.width = seq.width;
    split.height = seq.height;
    for (std::size_t i = 0; i < n_chunks; ++i) {
        SequenceChunk& c = chunks[order[i]];
        if (i < n_train)
            split.train.push_back(std::move(c));
        else if (i < n_train + n_val)
            split.validation.push_back(std::move(c));
        else
            split.test.push_back(std::move(c));
    }
    return split;
}

std::string write_frame_cache(const FrameSequence& seq) {
    std::string out = "FRSQ";
    put_u16(out, 1);
    put_u16(out, static_cast<std::uint16_t>(seq.width));
    put_u16(out, static_cast<std::uint16_t>(seq.height));
    put_u64(out, seq.frames.size());
    std::size_t pixels = seq.pixel_count();
    for (const Frame& f : seq.frames) {
        if (f.data.size() != 2 * pixels) throw DataError("frame cache: frame size mismatch");
        put_u64(out, static_cast<std::uint64_t>(f.t_start));
        put_u64(out, static_cast<std::uint64_t>(f.t_end));
        put_u64(out, static_cast<std::uint64_t>(f.t_ref));
        for (std::uint16_t v : f.data) put_u16(out, v);
    }
    return out;
}

FrameSequence read_frame_cache(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 18) throw DataError("frame cache: truncated header");
    if (std::memcmp(p, "FRSQ", 4) != 0) throw DataError("frame cache: bad magic");
    std::uint16_t version = get_u16(p + 4);
    if (version != 1) throw DataError("frame cache: unsupported version " + std::to_string(version));
    FrameSequence seq;
    seq.width = get_u16(p + 6);
    seq.height = get_u16(p + 8);
    std::uint64_t count = get_u64(p + 10);
    std::size_t pixels = seq.pixel_count();
    std::size_t frame_bytes = 24 + 2 * 2 * pixels;
    if (bytes.size() != 18 + count * frame_bytes) throw DataError("frame cache: size mismatch");
    std::size_t off = 18;
    seq.frames.resize(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        Frame& f = seq.frames[k];
        f.t_start = static_cast<std::int64_t>(get_u64(p + off));
        f.t_end = static_cast<std::int64_t>(get_u64(p + off + 8));
        f.t_ref = static_cast<std::int64_t>(get_u64(p + off + 16));
        off += 24;
        f.data.resize(2 * pixels);
        for (std::size_t i = 0; i < f.data.size(); ++i, off += 2) f.data[i] = get_u16(p + off);
    }
    return seq;
}

void write_frame_cache_file(const FrameSequence& seq, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write frame cache: " + path);
    std::string bytes = write_frame_cache(seq);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to frame cache: " + path);
}

FrameSequence read_frame_cache_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open frame cache: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_frame_cache(ss.str());
}

}  // namespace evgaze
