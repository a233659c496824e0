// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "evgaze/errors.hpp"

namespace evgaze {

enum class NeuronType { alif, plif };

/// Where the 1-D time-constant networks take their input from. The liquid
/// time constants concatenate an input with the neuron state; `block_input`
/// feeds them the features entering the recurrent block, `synaptic_current`
/// feeds them the fully connected layer's output (dimension-matched to the
/// membrane). Parameter counts differ substantially between the two.
enum class TauInput1d { block_input, synaptic_current };

struct ModelConfig {
    int in_channels = 2;
    int in_h = 130;
    int in_w = 173;
    std::vector<int> conv_channels{32, 64, 96, 128};
    std::vector<int> conv_strides{1, 2, 2, 2};
    int pool_blocks = 2;  // max-pool 2x2 after the first k conv blocks
    int kernel = 3;
    int tau_kernel = 3;
    double dropout_rate = 0.3;
    std::vector<int> hidden{128, 128, 128, 128};
    NeuronType neuron = NeuronType::alif;
    bool full_size_input = false;
    int full_size_channels = 16;
    int output_dim = 5;
    double surrogate_sigma = 0.5;
    double surrogate_scale = 1.0;
    TauInput1d tau_input_1d = TauInput1d::block_input;
    double b0 = 0.1;
    double threshold_beta = 1.8;
    double u_r = 0.0;
    std::uint64_t init_seed = 1;

    bool operator==(const ModelConfig&) const = default;
};

void validate_model_config(const ModelConfig& c);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

std::string neuron_type_name(NeuronType t);
NeuronType neuron_type_from_name(const std::string& s);

}  // namespace evgaze
