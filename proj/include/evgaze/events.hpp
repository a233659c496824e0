// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evgaze {

/// One DVS event: a signed brightness change at a pixel.
struct DvsEvent {
    std::int64_t t = 0;  // microseconds, non-negative
    int x = 0;           // column
    int y = 0;           // row
    int p = 0;           // polarity: 0 negative, 1 positive

    bool operator==(const DvsEvent&) const = default;
};

struct SensorGeometry {
    int width = 346;
    int height = 260;

    bool operator==(const SensorGeometry&) const = default;
};

/// Ordered event stream with its sensor geometry. Events are sorted by
/// timestamp (non-decreasing) and lie within the geometry.
struct EventStream {
    SensorGeometry geometry;
    std::vector<DvsEvent> events;

    bool operator==(const EventStream&) const = default;
};

enum class EventFormat { csv, binary };

/// Validates ordering and bounds; throws DataError with the offending index.
void validate_stream(const EventStream& s);

/// Parse an event stream from bytes. CSV expects the header `t_us,x,y,p`;
/// binary expects the EVST container. Malformed records report the line or
/// byte offset. CSV has no geometry header, so `csv_geometry` supplies it;
/// the binary container carries its own.
EventStream read_events(const std::string& bytes, EventFormat format, SensorGeometry csv_geometry = {});

/// Serialize a stream. read_events(write_events(s)) == s bit-exactly.
std::string write_events(const EventStream& s, EventFormat format);

EventStream read_events_file(const std::string& path, EventFormat format, SensorGeometry csv_geometry = {});
void write_events_file(const EventStream& s, const std::string& path, EventFormat format);

/// Binary container sizes: 18-byte header, 13 bytes per event record.
inline constexpr std::size_t kEventBinaryHeaderSize = 18;
inline constexpr std::size_t kEventBinaryRecordSize = 13;

}  // namespace evgaze
