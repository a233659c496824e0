// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#include "evgaze/model_config.hpp"

#include <set>

namespace evgaze {

void validate_model_config(const ModelConfig& c) {
    if (c.in_channels < 1 || c.in_h < 1 || c.in_w < 1) throw ConfigError("model: input geometry must be positive");
    if (c.conv_channels.empty() || c.conv_channels.size() != c.conv_strides.size())
        throw ConfigError("model: conv_channels and conv_strides must be non-empty and the same length");
    for (int ch : c.conv_channels)
        if (ch < 1) throw ConfigError("model: conv channels must be >= 1");
    for (int s : c.conv_strides)
        if (s < 1) throw ConfigError("model: conv strides must be >= 1");
    if (c.pool_blocks < 0 || c.pool_blocks > static_cast<int>(c.conv_channels.size()))
        throw ConfigError("model: pool_blocks out of range");
    if (c.kernel < 1 || c.kernel % 2 == 0 || c.tau_kernel < 1 || c.tau_kernel % 2 == 0)
        throw ConfigError("model: kernels must be odd and >= 1");
    if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0) throw ConfigError("model: dropout rate must be in [0, 1)");
    if (c.hidden.empty()) throw ConfigError("model: at least one recurrent block required");
    for (int h : c.hidden)
        if (h < 1) throw ConfigError("model: hidden sizes must be >= 1");
    if (c.output_dim != 5) throw ConfigError("model: output dimension is fixed at 5");
    if (c.surrogate_sigma <= 0.0) throw ConfigError("model: surrogate width must be > 0");
    if (c.full_size_channels < 1) throw ConfigError("model: full-size block channels must be >= 1");
}

std::string neuron_type_name(NeuronType t) { return t == NeuronType::alif ? "alif" : "plif"; }

NeuronType neuron_type_from_name(const std::string& s) {
    if (s == "alif") return NeuronType::alif;
    if (s == "plif") return NeuronType::plif;
    throw ConfigError("unknown neuron type '" + s + "' (expected alif or plif)");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["in_channels"] = c.in_channels;
    j["in_h"] = c.in_h;
    j["in_w"] = c.in_w;
    j["conv_channels"] = c.conv_channels;
    j["conv_strides"] = c.conv_strides;
    j["pool_blocks"] = c.pool_blocks;
    j["kernel"] = c.kernel;
    j["tau_kernel"] = c.tau_kernel;
    j["dropout_rate"] = c.dropout_rate;
    j["hidden"] = c.hidden;
    j["neuron"] = neuron_type_name(c.neuron);
    j["full_size_input"] = c.full_size_input;
    j["full_size_channels"] = c.full_size_channels;
    j["output_dim"] = c.output_dim;
    j["surrogate_sigma"] = c.surrogate_sigma;
    j["surrogate_scale"] = c.surrogate_scale;
    j["tau_input_1d"] = c.tau_input_1d == TauInput1d::block_input ? "block_input" : "synaptic_current";
    j["b0"] = c.b0;
    j["threshold_beta"] = c.threshold_beta;
    j["u_r"] = c.u_r;
    j["init_seed"] = c.init_seed;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "in_channels", "in_h", "in_w", "conv_channels", "conv_strides", "pool_blocks", "kernel", "tau_kernel",
        "dropout_rate", "hidden", "neuron", "full_size_input", "full_size_channels", "output_dim",
        "surrogate_sigma", "surrogate_scale", "tau_input_1d", "b0", "threshold_beta", "u_r", "init_seed"};
    for (auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
    ModelConfig c;
    if (j.contains("in_channels")) c.in_channels = j["in_channels"];
    if (j.contains("in_h")) c.in_h = j["in_h"];
    if (j.contains("in_w")) c.in_w = j["in_w"];
    if (j.contains("conv_channels")) c.conv_channels = j["conv_channels"].get<std::vector<int>>();
    if (j.contains("conv_strides")) c.conv_strides = j["conv_strides"].get<std::vector<int>>();
    if (j.contains("pool_blocks")) c.pool_blocks = j["pool_blocks"];
    if (j.contains("kernel")) c.kernel = j["kernel"];
    if (j.contains("tau_kernel")) c.tau_kernel = j["tau_kernel"];
    if (j.contains("dropout_rate")) c.dropout_rate = j["dropout_rate"];
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("neuron")) c.neuron = neuron_type_from_name(j["neuron"]);
    if (j.contains("full_size_input")) c.full_size_input = j["full_size_input"];
    if (j.contains("full_size_channels")) c.full_size_channels = j["full_size_channels"];
    if (j.contains("output_dim")) c.output_dim = j["output_dim"];
    if (j.contains("surrogate_sigma")) c.surrogate_sigma = j["surrogate_sigma"];
    if (j.contains("surrogate_scale")) c.surrogate_scale = j["surrogate_scale"];
    if (j.contains("tau_input_1d")) {
        std::string v = j["tau_input_1d"];
        if (v == "block_input")
            c.tau_input_1d = TauInput1d::block_input;
        else if (v == "synaptic_current")
            c.tau_input_1d = TauInput1d::synaptic_current;
        else
            throw ConfigError("model config: unknown tau_input_1d '" + v + "'");
    }
    if (j.contains("b0")) c.b0 = j["b0"];
    if (j.contains("threshold_beta")) c.threshold_beta = j["threshold_beta"];
    if (j.contains("u_r")) c.u_r = j["u_r"];
    if (j.contains("init_seed")) c.init_seed = j["init_seed"];
    validate_model_config(c);
    return c;
}

}  // namespace evgaze
