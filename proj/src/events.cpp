// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/events.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evgaze/errors.hpp"

namespace evgaze {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* name) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError("events csv line " + std::to_string(line_no) + ": malformed " + std::string(name) +
                        " field '" + std::string(field) + "'");
    return v;
}

EventStream read_events_csv(const std::string& text) {
    EventStream s;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        pos = eol + 1;
        if (line.empty()) continue;
        if (!have_header) {
            if (line != "t_us,x,y,p")
                throw DataError("events csv line 1: expected header 't_us,x,y,p', got '" + std::string(line) + "'");
            have_header = true;
            continue;
        }
        std::array<std::string_view, 4> fields;
        std::size_t start = 0;
        int nf = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (nf >= 4) throw DataError("events csv line " + std::to_string(line_no) + ": too many fields");
                fields[static_cast<std::size_t>(nf++)] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (nf != 4) throw DataError("events csv line " + std::to_string(line_no) + ": expected 4 fields, got " + std::to_string(nf));
        DvsEvent e;
        e.t = parse_int(fields[0], line_no, "t_us");
        e.x = static_cast<int>(parse_int(fields[1], line_no, "x"));
        e.y = static_cast<int>(parse_int(fields[2], line_no, "y"));
        e.p = static_cast<int>(parse_int(fields[3], line_no, "p"));
        s.events.push_back(e);
    }
    if (!have_header && !text.empty())
        throw DataError("events csv: missing header 't_us,x,y,p'");
    return s;
}

EventStream read_events_binary(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kEventBinaryHeaderSize)
        throw DataError("events binary: truncated header (have " + std::to_string(bytes.size()) + " bytes)");
    if (std::memcmp(p, "EVST", 4) != 0) throw DataError("events binary: bad magic at offset 0");
    std::uint16_t version = get_u16(p + 4);
    if (version != 1) throw DataError("events binary: unsupported version " + std::to_string(version));
    EventStream s;
    s.geometry.width = get_u16(p + 6);
    s.geometry.height = get_u16(p + 8);
    std::uint64_t count = get_u64(p + 10);
    std::size_t need = kEventBinaryHeaderSize + count * kEventBinaryRecordSize;
    if (bytes.size() != need)
        throw DataError("events binary: expected " + std::to_string(need) + " bytes for " + std::to_string(count) +
                        " events, got " + std::to_string(bytes.size()));
    s.events.resize(count);
    std::size_t off = kEventBinaryHeaderSize;
    for (std::uint64_t i = 0; i < count; ++i, off += kEventBinaryRecordSize) {
        DvsEvent& e = s.events[i];
        e.t = static_cast<std::int64_t>(get_u64(p + off));
        e.x = get_u16(p + off + 8);
        e.y = get_u16(p + off + 10);
        e.p = p[off + 12];
    }
    return s;
}

}  // namespace

void validate_stream(const EventStream& s) {
    std::int64_t prev_t = -1;
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const DvsEvent& e = s.events[i];
        if (e.t < prev_t)
            throw DataError("event " + std::to_string(i) + ": timestamp regression (" + std::to_string(e.t) +
                            " after " + std::to_string(prev_t) + ")");
        prev_t = e.t;
        if (e.t < 0) throw DataError("event " + std::to_string(i) + ": negative timestamp");
        if (e.x < 0 || e.x >= s.geometry.width || e.y < 0 || e.y >= s.geometry.height)
            throw DataError("event " + std::to_string(i) + ": coordinate (" + std::to_string(e.x) + "," +
                            std::to_string(e.y) + ") outside geometry " + std::to_string(s.geometry.width) + "x" +
                            std::to_string(s.geometry.height));
        if (e.p != 0 && e.p != 1)
            throw DataError("event " + std::to_string(i) + ": polarity must be 0 or 1, got " + std::to_string(e.p));
    }
}

EventStream read_events(const std::string& bytes, EventFormat format, SensorGeometry csv_geometry) {
    EventStream s;
    if (format == EventFormat::csv) {
        s = read_events_csv(bytes);
        s.geometry = csv_geometry;
    } else {
        s = read_events_binary(bytes);
    }
    validate_stream(s);
    return s;
}

std::string write_events(const EventStream& s, EventFormat format) {
    validate_stream(s);
    std::string out;
    if (format == EventFormat::csv) {
        out = "t_us,x,y,p\n";
        for (const DvsEvent& e : s.events) {
            out += std::to_string(e.t);
            out += ',';
            out += std::to_string(e.x);
            out += ',';
            out += std::to_string(e.y);
            out += ',';
            out += std::to_string(e.p);
            out += '\n';
        }
    } else {
        out.reserve(kEventBinaryHeaderSize + s.events.size() * kEventBinaryRecordSize);
        out += "EVST";
        put_u16(out, 1);
        put_u16(out, static_cast<std::uint16_t>(s.geometry.width));
        put_u16(out, static_cast<std::uint16_t>(s.geometry.height));
        put_u64(out, s.events.size());
        for (const DvsEvent& e : s.events) {
            put_u64(out, static_cast<std::uint64_t>(e.t));
            put_u16(out, static_cast<std::uint16_t>(e.x));
            put_u16(out, static_cast<std::uint16_t>(e.y));
            out.push_back(static_cast<char>(e.p));
        }
    }
    return out;
}

EventStream read_events_file(const std::string& path, EventFormat format, SensorGeometry csv_geometry) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open events file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_events(ss.str(), format, csv_geometry);
}

void write_events_file(const EventStream& s, const std::string& path, EventFormat format) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write events file: " + path);
    std::string bytes = write_events(s, format);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to events file: " + path);
}

}  // namespace evgaze
