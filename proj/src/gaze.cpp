// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/gaze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evgaze/errors.hpp"

namespace evgaze {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

double parse_double(std::string_view field, std::size_t line_no, const char* name) {
    // std::from_chars<double> is available on this toolchain and locale-free.
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError("gaze csv line " + std::to_string(line_no) + ": malformed " + std::string(name) + " field '" +
                        std::string(field) + "'");
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}
}  // namespace

void validate_track(const GazeTrack& track) {
    for (std::size_t i = 1; i < track.samples.size(); ++i) {
        if (track.samples[i].t <= track.samples[i - 1].t)
            throw DataError("gaze track: timestamps not strictly increasing at sample " + std::to_string(i));
    }
}

InterpResult interpolate_at(const GazeTrack& track, std::int64_t t) {
    if (track.samples.empty()) throw DataError("interpolate_at: empty gaze track");
    const auto& v = track.samples;
    if (t <= v.front().t) {
        if (t == v.front().t) return {v.front(), 0};
        GazeSample s = v.front();
        s.t = t;
        return {s, kInfiniteGap};
    }
    if (t >= v.back().t) {
        if (t == v.back().t) return {v.back(), 0};
        GazeSample s = v.back();
        s.t = t;
        return {s, kInfiniteGap};
    }
    auto it = std::lower_bound(v.begin(), v.end(), t,
                               [](const GazeSample& s, std::int64_t q) { return s.t < q; });
    if (it->t == t) return {*it, 0};
    const GazeSample& hi = *it;
    const GazeSample& lo = *(it - 1);
    std::int64_t gap = hi.t - lo.t;
    double w = static_cast<double>(t - lo.t) / static_cast<double>(gap);
    GazeSample s;
    s.t = t;
    for (int k = 0; k < 3; ++k) s.origin[static_cast<std::size_t>(k)] = lo.origin[static_cast<std::size_t>(k)] + w * (hi.origin[static_cast<std::size_t>(k)] - lo.origin[static_cast<std::size_t>(k)]);
    s.phi = lo.phi + w * (hi.phi - lo.phi);
    s.psi = lo.psi + w * (hi.psi - lo.psi);
    return {s, gap};
}

std::array<double, 3> spherical_to_unit(double phi_deg, double psi_deg) {
    double phi = phi_deg * kDegToRad;
    double psi = psi_deg * kDegToRad;
    return {std::cos(psi) * std::sin(phi), std::sin(psi), std::cos(psi) * std::cos(phi)};
}

double angle_error(double pred_phi, double pred_psi, double true_phi, double true_psi) {
    auto a = spherical_to_unit(pred_phi, pred_psi);
    auto b = spherical_to_unit(true_phi, true_psi);
    double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot = std::clamp(dot, -1.0, 1.0);
    return std::acos(dot) / kDegToRad;
}

double pupil_error(const std::array<double, 3>& pred_origin, const std::array<double, 3>& truth_origin) {
    double dx = pred_origin[0] - truth_origin[0];
    double dy = pred_origin[1] - truth_origin[1];
    double dz = pred_origin[2] - truth_origin[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

GazeTrack read_gaze_csv(const std::string& text) {
    GazeTrack track;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    const std::string header = "t_us,origin_x_mm,origin_y_mm,origin_z_mm,phi_deg,psi_deg";
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        pos = eol + 1;
        if (line.empty()) continue;
        if (!have_header) {
            if (line != header)
                throw DataError("gaze csv line 1: expected header '" + header + "'");
            have_header = true;
            continue;
        }
        std::array<std::string_view, 6> fields;
        std::size_t start = 0;
        int nf = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (nf >= 6) throw DataError("gaze csv line " + std::to_string(line_no) + ": too many fields");
                fields[static_cast<std::size_t>(nf++)] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (nf != 6) throw DataError("gaze csv line " + std::to_string(line_no) + ": expected 6 fields, got " + std::to_string(nf));
        GazeSample s;
        std::int64_t t = 0;
        auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), t);
        if (ec != std::errc() || ptr != fields[0].data() + fields[0].size())
            throw DataError("gaze csv line " + std::to_string(line_no) + ": malformed t_us field");
        s.t = t;
        s.origin[0] = parse_double(fields[1], line_no, "origin_x_mm");
        s.origin[1] = parse_double(fields[2], line_no, "origin_y_mm");
        s.origin[2] = parse_double(fields[3], line_no, "origin_z_mm");
        s.phi = parse_double(fields[4], line_no, "phi_deg");
        s.psi = parse_double(fields[5], line_no, "psi_deg");
        track.samples.push_back(s);
    }
    if (!have_header && !text.empty()) throw DataError("gaze csv: missing header");
    validate_track(track);
    return track;
}

std::string write_gaze_csv(const GazeTrack& track) {
    validate_track(track);
    std::string out = "t_us,origin_x_mm,origin_y_mm,origin_z_mm,phi_deg,psi_deg\n";
    for (const GazeSample& s : track.samples) {
        out += std::to_string(s.t);
        for (int k = 0; k < 3; ++k) {
            out += ',';
            out += format_double(s.origin[static_cast<std::size_t>(k)]);
        }
        out += ',';
        out += format_double(s.phi);
        out += ',';
        out += format_double(s.psi);
        out += '\n';
    }
    return out;
}

GazeTrack read_gaze_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open gaze file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_gaze_csv(ss.str());
}

void write_gaze_csv_file(const GazeTrack& track, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write gaze file: " + path);
    std::string bytes = write_gaze_csv(track);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to gaze file: " + path);
}

}  // namespace evgaze
