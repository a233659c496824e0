// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: magic GSC1, version u16, length-prefixed canonical
// JSON (model config + training seed and step counter), then named tensors
// as (u16 name length, name, u8 dtype tag, u32 rank, u32 dims, raw
// little-endian values). Load reproduces the model bit-exactly.

#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "evgaze/model.hpp"

namespace evgaze {

namespace detail {

template <class T>
constexpr std::uint8_t dtype_tag();
template <>
constexpr std::uint8_t dtype_tag<float>() {
    return 0;
}
template <>
constexpr std::uint8_t dtype_tag<double>() {
    return 1;
}

inline void ck_put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void ck_put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void ck_put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;

    void need(std::size_t k, const char* what) {
        if (off + k > n) throw DataError(std::string("checkpoint: truncated payload reading ") + what);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
        off += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[off + static_cast<std::size_t>(i)];
        off += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[off + static_cast<std::size_t>(i)];
        off += 8;
        return v;
    }
    std::string bytes(std::size_t k, const char* what) {
        need(k, what);
        std::string s(reinterpret_cast<const char*>(p + off), k);
        off += k;
        return s;
    }
};

template <class T>
void write_tensor(std::string& out, const std::string& name, const Tensor<T>& t) {
    ck_put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(dtype_tag<T>()));
    ck_put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) ck_put_u32(out, static_cast<std::uint32_t>(d));
    std::size_t nbytes = t.data.size() * sizeof(T);
    std::size_t base = out.size();
    out.resize(base + nbytes);
    std::memcpy(out.data() + base, t.data.data(), nbytes);
}

template <class T>
std::pair<std::string, Tensor<T>> read_tensor(ByteReader& r) {
    std::uint16_t name_len = r.u16("tensor name length");
    std::string name = r.bytes(name_len, "tensor name");
    std::uint8_t tag = static_cast<std::uint8_t>(r.bytes(1, "dtype tag")[0]);
    if (tag != dtype_tag<T>())
        throw DataError("checkpoint: dtype mismatch for tensor '" + name + "' (tag " + std::to_string(tag) + ")");
    std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw DataError("checkpoint: corrupt rank for tensor '" + name + "'");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(r.u32("tensor dim")));
    std::int64_t numel = shape_numel(shape);
    if (numel < 0 || numel > (1LL << 31)) throw DataError("checkpoint: corrupt shape for tensor '" + name + "'");
    Tensor<T> t(shape);
    std::string raw = r.bytes(static_cast<std::size_t>(numel) * sizeof(T), "tensor values");
    std::memcpy(t.data.data(), raw.data(), raw.size());
    return {std::move(name), std::move(t)};
}

}  // namespace detail

inline constexpr std::uint16_t kCheckpointVersion = 1;

template <class T>
std::string save_checkpoint(Model<T>& m, std::uint64_t train_seed, std::uint64_t step) {
    nlohmann::json meta;
    meta["model"] = model_config_to_json(m.config);
    meta["train_seed"] = train_seed;
    meta["step"] = step;
    std::string json_text = meta.dump();

    std::string out = "GSC1";
    detail::ck_put_u16(out, kCheckpointVersion);
    detail::ck_put_u32(out, static_cast<std::uint32_t>(json_text.size()));
    out += json_text;

    std::uint32_t count = static_cast<std::uint32_t>(m.params().size() + m.named_buffers().size());
    detail::ck_put_u32(out, count);
    for (Param<T>* p : m.params()) detail::write_tensor(out, p->name, p->value);
    for (auto& [name, buf] : m.named_buffers()) detail::write_tensor(out, name, *buf);
    return out;
}

template <class T>
struct LoadedCheckpoint {
    Model<T> model;
    std::uint64_t train_seed = 0;
    std::uint64_t step = 0;
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& bytes) {
    detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
    std::string magic = r.bytes(4, "magic");
    if (magic != "GSC1") throw DataError("checkpoint: bad magic");
    std::uint16_t version = r.u16("version");
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t json_len = r.u32("config length");
    std::string json_text = r.bytes(json_len, "config json");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: corrupt config json: ") + e.what());
    }

    LoadedCheckpoint<T> out;
    out.model = build_model<T>(model_config_from_json(meta.at("model")));
    out.train_seed = meta.value("train_seed", 0ULL);
    out.step = meta.value("step", 0ULL);

    std::uint32_t count = r.u32("tensor count");
    std::map<std::string, Tensor<T>> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = detail::read_tensor<T>(r);
        tensors.emplace(std::move(name), std::move(t));
    }
    if (r.off != r.n) throw DataError("checkpoint: trailing bytes after last tensor");

    auto take = [&](const std::string& name, Tensor<T>& into) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
        if (it->second.shape != into.shape)
            throw DataError("checkpoint: shape mismatch for tensor '" + name + "'");
        into = std::move(it->second);
        tensors.erase(it);
    };
    for (Param<T>* p : out.model.params()) take(p->name, p->value);
    for (auto& [name, buf] : out.model.named_buffers()) take(name, *buf);
    if (!tensors.empty()) throw DataError("checkpoint: unknown tensor '" + tensors.begin()->first + "'");
    return out;
}

template <class T>
void save_checkpoint_file(Model<T>& m, std::uint64_t train_seed, std::uint64_t step, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    std::string bytes = save_checkpoint(m, train_seed, step);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("short write to checkpoint: " + path);
}

template <class T>
LoadedCheckpoint<T> load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_checkpoint<T>(ss.str());
}

}  // namespace evgaze
