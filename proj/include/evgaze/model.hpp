// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// GazeSCRNN: four convolutional spiking blocks (conv, batchnorm, pooling on
// the early blocks, adaptive neurons), dropout, four recurrent spiking blocks
// that concatenate their input with their own previous spikes, and a
// five-output non-resetting membrane readout.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evgaze/layers.hpp"
#include "evgaze/model_config.hpp"

namespace evgaze {

template <class T>
struct ConvBlock {
    Conv2dLayer<T> conv;
    BatchNormLayer<T> bn;
    bool pool = false;
    NeuronType kind = NeuronType::alif;
    AlifConv2d<T> alif;
    PlifLayer<T> plif;
    Shape out_chw;  // activation shape after optional pooling

    Var<T> neuron_step(Tape<T>& tape, Var<T> x, LayerState<T>& state) {
        return kind == NeuronType::alif ? alif.step(tape, x, state) : plif.step(tape, x, state);
    }
    LayerStateValues<T> zero_state(int batch) const {
        return kind == NeuronType::alif ? alif.zero_state(batch) : plif.zero_state(batch);
    }
};

template <class T>
struct RecurrentBlock {
    LinearLayer<T> fc;  // (in + hidden) -> hidden
    BatchNormLayer<T> bn;
    NeuronType kind = NeuronType::alif;
    AlifLinear<T> alif;
    PlifLayer<T> plif;
    int in_dim = 0;
    int hidden = 0;

    LayerStateValues<T> zero_state(int batch) const {
        return kind == NeuronType::alif ? alif.zero_state(batch) : plif.zero_state(batch);
    }
};

template <class T>
struct ModelState {
    std::vector<LayerState<T>> conv;
    std::vector<LayerState<T>> rec;
    LayerState<T> readout;
};

template <class T>
struct ModelStateValues {
    std::vector<LayerStateValues<T>> conv;
    std::vector<LayerStateValues<T>> rec;
    LayerStateValues<T> readout;
};

/// Per-layer spike tally for one step; ratio() feeds the mean firing rate.
struct SpikeStat {
    std::string layer;
    double spikes = 0.0;
    double slots = 0.0;
    double ratio() const { return slots > 0 ? spikes / slots : 0.0; }
};

template <class T>
class Model {
  public:
    ModelConfig config;
    std::vector<ConvBlock<T>> conv_blocks;
    std::vector<RecurrentBlock<T>> rec_blocks;
    LinearLayer<T> head;
    ReadoutLayer<T> readout;
    // Target standardization constants (5), applied to the origin channels.
    Tensor<T> target_mean, target_std;
    std::uint64_t dropout_seed = 0;

    int flatten_dim = 0;

    /// Parameter index in a fixed enumeration order. Built per call: the
    /// model is a movable value type, so cached member pointers would dangle.
    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        for (auto& b : conv_blocks) {
            b.conv.collect(out);
            b.bn.collect(out);
            if (b.kind == NeuronType::alif)
                b.alif.collect(out);
            else
                b.plif.collect(out);
        }
        for (auto& b : rec_blocks) {
            b.fc.collect(out);
            b.bn.collect(out);
            if (b.kind == NeuronType::alif)
                b.alif.collect(out);
            else
                b.plif.collect(out);
        }
        head.collect(out);
        readout.collect(out);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_buffers() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (auto& b : conv_blocks) {
            out.emplace_back(b.bn.gamma.name.substr(0, b.bn.gamma.name.size() - 6) + ".running_mean", &b.bn.running_mean);
            out.emplace_back(b.bn.gamma.name.substr(0, b.bn.gamma.name.size() - 6) + ".running_var", &b.bn.running_var);
        }
        for (auto& b : rec_blocks) {
            out.emplace_back(b.bn.gamma.name.substr(0, b.bn.gamma.name.size() - 6) + ".running_mean", &b.bn.running_mean);
            out.emplace_back(b.bn.gamma.name.substr(0, b.bn.gamma.name.size() - 6) + ".running_var", &b.bn.running_var);
        }
        out.emplace_back("target.mean", &target_mean);
        out.emplace_back("target.std", &target_std);
        return out;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto* p : params()) n += p->value.numel();
        return n;
    }

    ModelStateValues<T> zero_state(int batch) const {
        ModelStateValues<T> s;
        for (const auto& b : conv_blocks) s.conv.push_back(b.zero_state(batch));
        for (const auto& b : rec_blocks) s.rec.push_back(b.zero_state(batch));
        s.readout = readout.zero_state(batch);
        return s;
    }

    ModelState<T> attach(Tape<T>& tape, const ModelStateValues<T>& v) const {
        ModelState<T> s;
        for (const auto& x : v.conv) s.conv.push_back(attach_state(tape, x));
        for (const auto& x : v.rec) s.rec.push_back(attach_state(tape, x));
        s.readout = attach_state(tape, v.readout);
        return s;
    }

    ModelStateValues<T> detach(Tape<T>& tape, const ModelState<T>& s) const {
        ModelStateValues<T> v;
        for (const auto& x : s.conv) v.conv.push_back(detach_state(tape, x));
        for (const auto& x : s.rec) v.rec.push_back(detach_state(tape, x));
        v.readout = detach_state(tape, s.readout);
        return v;
    }

    /// One frame through the network. `nonce` keys the dropout mask so a
    /// repeated forward of the same step is bit-identical.
    Var<T> forward_step(Tape<T>& tape, Var<T> frame, ModelState<T>& state, Mode mode, std::uint64_t nonce,
                        std::vector<SpikeStat>* stats = nullptr) {
        Var<T> h = frame;
        for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
            ConvBlock<T>& blk = conv_blocks[i];
            h = blk.conv.forward(tape, h);
            h = blk.bn.forward(tape, h, mode);
            if (blk.pool) h = maxpool2d(tape, h, 2);
            Var<T> s = blk.neuron_step(tape, h, state.conv[i]);
            if (stats) stats->push_back(tally(tape, "conv" + std::to_string(i + 1), s));
            h = s;
        }
        h = flatten(tape, h);
        h = dropout(tape, h, config.dropout_rate, mode, dropout_seed, nonce);
        for (std::size_t i = 0; i < rec_blocks.size(); ++i) {
            RecurrentBlock<T>& blk = rec_blocks[i];
            Var<T> block_input = h;
            Var<T> fc_in = concat_cols(tape, block_input, state.rec[i].s);
            Var<T> current = blk.bn.forward(tape, blk.fc.forward(tape, fc_in), mode);
            Var<T> s;
            if (blk.kind == NeuronType::alif) {
                Var<T> tau_x = config.tau_input_1d == TauInput1d::block_input ? block_input : current;
                s = blk.alif.step(tape, current, tau_x, state.rec[i]);
            } else {
                s = blk.plif.step(tape, current, state.rec[i]);
            }
            if (stats) stats->push_back(tally(tape, "rec" + std::to_string(i + 1), s));
            h = s;
        }
        return readout.step(tape, head.forward(tape, h), state.readout);
    }

  private:
    static SpikeStat tally(Tape<T>& tape, std::string name, Var<T> s) {
        const Tensor<T>& v = tape.val(s);
        double spikes = 0;
        for (T x : v.data) spikes += static_cast<double>(x);
        return {std::move(name), spikes, static_cast<double>(v.numel())};
    }
};

/// Builds the network with deterministic initialization from the config seed.
template <class T>
Model<T> build_model(const ModelConfig& config) {
    validate_model_config(config);
    Model<T> m;
    m.config = config;
    m.dropout_seed = Rng::derive(config.init_seed, 0xD0);
    m.target_mean = Tensor<T>::zeros(Shape{config.output_dim});
    m.target_std = Tensor<T>::full(Shape{config.output_dim}, T(1));

    Rng rng(config.init_seed);
    NeuronDynamics<T> nd{static_cast<T>(config.b0), static_cast<T>(config.threshold_beta),
                         static_cast<T>(config.u_r), true};
    SurrogateConfig<T> sg{static_cast<T>(config.surrogate_sigma), static_cast<T>(config.surrogate_scale), false};

    struct BlockPlan {
        std::string name;
        int channels, stride;
        bool pool;
    };
    std::vector<BlockPlan> plans;
    if (config.full_size_input) plans.push_back({"conv0", config.full_size_channels, 1, true});
    for (std::size_t i = 0; i < config.conv_channels.size(); ++i)
        plans.push_back({"conv" + std::to_string(i + 1), config.conv_channels[i], config.conv_strides[i],
                         static_cast<int>(i) < config.pool_blocks});

    int C = config.in_channels, H = config.in_h, W = config.in_w;
    int pad = config.kernel / 2;
    for (const BlockPlan& plan : plans) {
        ConvBlock<T> blk;
        blk.kind = config.neuron;
        blk.pool = plan.pool;
        blk.conv.build(plan.name, plan.channels, C, config.kernel, plan.stride, pad, rng, false);
        blk.bn.build(plan.name + ".bn", plan.channels);
        H = (H + 2 * pad - config.kernel) / plan.stride + 1;
        W = (W + 2 * pad - config.kernel) / plan.stride + 1;
        if (plan.pool) {
            H /= 2;
            W /= 2;
        }
        if (H < 1 || W < 1) throw ConfigError("model: spatial dimensions collapse at " + plan.name);
        blk.out_chw = Shape{plan.channels, H, W};
        if (config.neuron == NeuronType::alif)
            blk.alif.build(plan.name, blk.out_chw, config.tau_kernel, nd, sg, rng);
        else
            blk.plif.build(plan.name, Shape{plan.channels, H, W}, nd, sg);
        C = plan.channels;
        m.conv_blocks.push_back(std::move(blk));
    }
    m.flatten_dim = C * H * W;

    int in_dim = m.flatten_dim;
    for (std::size_t i = 0; i < config.hidden.size(); ++i) {
        RecurrentBlock<T> blk;
        blk.kind = config.neuron;
        blk.in_dim = in_dim;
        blk.hidden = config.hidden[i];
        std::string name = "rec" + std::to_string(i + 1);
        blk.fc.build(name + ".fc", blk.hidden, in_dim + blk.hidden, rng, false);
        blk.bn.build(name + ".bn", blk.hidden);
        if (config.neuron == NeuronType::alif) {
            int tau_in = config.tau_input_1d == TauInput1d::block_input ? in_dim : blk.hidden;
            blk.alif.build(name, blk.hidden, tau_in, nd, sg, rng);
        } else {
            blk.plif.build(name, Shape{blk.hidden}, nd, sg);
        }
        in_dim = blk.hidden;
        m.rec_blocks.push_back(std::move(blk));
    }

    m.head.build("head", config.output_dim, in_dim, rng, false);
    m.readout.build("readout", config.output_dim);
    return m;
}

/// Switch every spike op into its smooth Gaussian-CDF twin (or back). The
/// twin network is fully differentiable, which is what finite-difference
/// gradient checks run against.
template <class T>
void set_smooth_twin(Model<T>& m, bool on) {
    for (auto& b : m.conv_blocks) {
        b.alif.sg.smooth_twin = on;
        b.plif.sg.smooth_twin = on;
    }
    for (auto& b : m.rec_blocks) {
        b.alif.sg.smooth_twin = on;
        b.plif.sg.smooth_twin = on;
    }
}

}  // namespace evgaze
