// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// Spiking neuron layers: ALIF with liquid time constants (input- and
// state-dependent decay), PLIF with trained per-neuron constants, and the
// non-resetting membrane readout. The clocked update shared by all of them:
//
//   u <- u_prev + tau_m * (x - u_prev)
//   b <- tau_adp * b_prev + (1 - tau_adp) * s_prev
//   theta = b0 + beta * b
//   s = step(u - theta)              (surrogate gradient on the backward)
//   u <- u * (1 - s) + u_r * s       (when the reset is enabled)

#pragma once

#include <string>
#include <vector>

#include "evgaze/ops.hpp"
#include "evgaze/rng.hpp"

namespace evgaze {

enum class NeuronKind { alif, plif };

/// Per-layer neuron state: membrane potential, adaptation variable, previous
/// spikes. Lives on the tape during a window.
template <class T>
struct LayerState {
    Var<T> u, b, s;
};

/// Detached state values, carried across window boundaries.
template <class T>
struct LayerStateValues {
    Tensor<T> u, b, s;
};

template <class T>
LayerState<T> attach_state(Tape<T>& tape, const LayerStateValues<T>& v) {
    return {tape.constant(v.u), tape.constant(v.b), tape.constant(v.s)};
}

template <class T>
LayerStateValues<T> detach_state(Tape<T>& tape, const LayerState<T>& s) {
    return {tape.val(s.u), tape.val(s.b), tape.val(s.s)};
}

template <class T>
LayerStateValues<T> zero_state_values(const Shape& shape, T u_r) {
    return {Tensor<T>::full(shape, u_r), Tensor<T>::zeros(shape), Tensor<T>::zeros(shape)};
}

template <class T>
struct NeuronDynamics {
    T b0 = T(0.1);
    T beta = T(1.8);
    T u_r = T(0);
    bool reset_enabled = true;
};

/// One clocked update of the adaptive threshold dynamics given the decay
/// constants. Writes the new state and returns the spikes.
template <class T>
Var<T> adaptive_neuron_update(Tape<T>& tape, Var<T> x, Var<T> tau_m, Var<T> tau_adp, LayerState<T>& state,
                              const NeuronDynamics<T>& nd, const SurrogateConfig<T>& sg) {
    Var<T> u = add(tape, state.u, mul(tape, tau_m, sub(tape, x, state.u)));
    Var<T> b = add(tape, mul(tape, tau_adp, state.b), mul(tape, one_minus(tape, tau_adp), state.s));
    Var<T> theta = affine(tape, b, nd.beta, nd.b0);
    Var<T> s = spike(tape, sub(tape, u, theta), sg);
    if (nd.reset_enabled) u = add(tape, mul(tape, u, one_minus(tape, s)), affine(tape, s, nd.u_r, T(0)));
    state.u = u;
    state.b = b;
    state.s = s;
    return s;
}

// ---------------------------------------------------------------------------
// Parameterized building blocks
// ---------------------------------------------------------------------------

template <class T>
void init_uniform(Param<T>& p, Rng& rng, double bound) {
    for (auto& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
struct Conv2dLayer {
    Param<T> w, b;
    int stride = 1;
    int pad = 1;

    void build(const std::string& name, int co, int ci, int k, int stride_, int pad_, Rng& rng, bool zero_bias) {
        stride = stride_;
        pad = pad_;
        w.name = name + ".w";
        w.value = Tensor<T>(Shape{co, ci, k, k});
        b.name = name + ".b";
        b.value = Tensor<T>(Shape{co});
        double bound = 1.0 / std::sqrt(static_cast<double>(ci) * k * k);
        init_uniform(w, rng, bound);
        if (!zero_bias) init_uniform(b, rng, bound);
    }

    Var<T> forward(Tape<T>& tape, Var<T> x) { return conv2d(tape, x, tape.use(w), tape.use(b), stride, pad); }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <class T>
struct LinearLayer {
    Param<T> w, b;

    void build(const std::string& name, int out_dim, int in_dim, Rng& rng, bool zero_bias) {
        w.name = name + ".w";
        w.value = Tensor<T>(Shape{out_dim, in_dim});
        b.name = name + ".b";
        b.value = Tensor<T>(Shape{out_dim});
        double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
        init_uniform(w, rng, bound);
        if (!zero_bias) init_uniform(b, rng, bound);
    }

    Var<T> forward(Tape<T>& tape, Var<T> x) { return linear(tape, x, tape.use(w), tape.use(b)); }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <class T>
struct BatchNormLayer {
    Param<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    T eps = T(1e-5);
    T momentum = T(0.1);

    void build(const std::string& name, int channels) {
        gamma.name = name + ".gamma";
        gamma.value = Tensor<T>::full(Shape{channels}, T(1));
        beta.name = name + ".beta";
        beta.value = Tensor<T>(Shape{channels});
        running_mean = Tensor<T>(Shape{channels});
        running_var = Tensor<T>::full(Shape{channels}, T(1));
    }

    Var<T> forward(Tape<T>& tape, Var<T> x, Mode mode) {
        return batchnorm(tape, x, tape.use(gamma), tape.use(beta), running_mean, running_var, mode, eps, momentum);
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// ---------------------------------------------------------------------------
// Neuron layers
// ---------------------------------------------------------------------------

/// ALIF over a (C,H,W) activation; the time-constant networks are C->C
/// convolutions on the summed current and state.
template <class T>
struct AlifConv2d {
    Conv2dLayer<T> tau_m_net, tau_adp_net;
    NeuronDynamics<T> nd;
    SurrogateConfig<T> sg;
    Shape act_chw;  // (C,H,W)

    void build(const std::string& name, Shape chw, int tau_kernel, const NeuronDynamics<T>& nd_,
               const SurrogateConfig<T>& sg_, Rng& rng) {
        act_chw = std::move(chw);
        nd = nd_;
        sg = sg_;
        int c = act_chw[0];
        tau_m_net.build(name + ".tau_m", c, c, tau_kernel, 1, tau_kernel / 2, rng, true);
        tau_adp_net.build(name + ".tau_adp", c, c, tau_kernel, 1, tau_kernel / 2, rng, true);
    }

    Var<T> step(Tape<T>& tape, Var<T> x, LayerState<T>& state) {
        Var<T> tau_m = sigmoid(tape, tau_m_net.forward(tape, add(tape, x, state.u)));
        Var<T> tau_adp = sigmoid(tape, tau_adp_net.forward(tape, add(tape, x, state.b)));
        return adaptive_neuron_update(tape, x, tau_m, tau_adp, state, nd, sg);
    }

    LayerStateValues<T> zero_state(int batch) const {
        return zero_state_values(Shape{batch, act_chw[0], act_chw[1], act_chw[2]}, nd.u_r);
    }

    void collect(std::vector<Param<T>*>& out) {
        tau_m_net.collect(out);
        tau_adp_net.collect(out);
    }
};

/// ALIF over a feature vector; the time-constant networks are linear maps on
/// the concatenation of a caller-chosen tau input with the state.
template <class T>
struct AlifLinear {
    LinearLayer<T> tau_m_net, tau_adp_net;
    NeuronDynamics<T> nd;
    SurrogateConfig<T> sg;
    int hidden = 0;

    void build(const std::string& name, int hidden_, int tau_in, const NeuronDynamics<T>& nd_,
               const SurrogateConfig<T>& sg_, Rng& rng) {
        hidden = hidden_;
        nd = nd_;
        sg = sg_;
        tau_m_net.build(name + ".tau_m", hidden, tau_in + hidden, rng, true);
        tau_adp_net.build(name + ".tau_adp", hidden, tau_in + hidden, rng, true);
    }

    Var<T> step(Tape<T>& tape, Var<T> x, Var<T> tau_x, LayerState<T>& state) {
        Var<T> tau_m = sigmoid(tape, tau_m_net.forward(tape, concat_cols(tape, tau_x, state.u)));
        Var<T> tau_adp = sigmoid(tape, tau_adp_net.forward(tape, concat_cols(tape, tau_x, state.b)));
        return adaptive_neuron_update(tape, x, tau_m, tau_adp, state, nd, sg);
    }

    LayerStateValues<T> zero_state(int batch) const { return zero_state_values(Shape{batch, hidden}, nd.u_r); }

    void collect(std::vector<Param<T>*>& out) {
        tau_m_net.collect(out);
        tau_adp_net.collect(out);
    }
};

/// PLIF: same dynamics with trained, input-independent time constants.
/// Per-channel for conv activations, per-neuron for vectors.
template <class T>
struct PlifLayer {
    Param<T> tau_m_raw, tau_adp_raw;
    NeuronDynamics<T> nd;
    SurrogateConfig<T> sg;
    Shape act_shape_tail;  // (C,H,W) or (F)

    void build(const std::string& name, Shape tail, const NeuronDynamics<T>& nd_, const SurrogateConfig<T>& sg_) {
        act_shape_tail = std::move(tail);
        nd = nd_;
        sg = sg_;
        int c = act_shape_tail[0];
        tau_m_raw.name = name + ".tau_m";
        tau_m_raw.value = Tensor<T>(Shape{c});
        tau_adp_raw.name = name + ".tau_adp";
        tau_adp_raw.value = Tensor<T>(Shape{c});
    }

    Var<T> step(Tape<T>& tape, Var<T> x, LayerState<T>& state) {
        Shape like = tape.val(x).shape;  // copy: use() below may grow the tape
        Var<T> tau_m = sigmoid(tape, broadcast_like(tape, tape.use(tau_m_raw), like));
        Var<T> tau_adp = sigmoid(tape, broadcast_like(tape, tape.use(tau_adp_raw), like));
        return adaptive_neuron_update(tape, x, tau_m, tau_adp, state, nd, sg);
    }

    LayerStateValues<T> zero_state(int batch) const {
        Shape s{batch};
        s.insert(s.end(), act_shape_tail.begin(), act_shape_tail.end());
        return zero_state_values(s, nd.u_r);
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&tau_m_raw);
        out.push_back(&tau_adp_raw);
    }
};

/// Readout: membrane integration only. Never spikes, never resets; the
/// membrane potential is the regression output.
template <class T>
struct ReadoutLayer {
    Param<T> tau_m_raw;
    int dim = 0;
    T u_r = T(0);

    void build(const std::string& name, int dim_) {
        dim = dim_;
        tau_m_raw.name = name + ".tau_m";
        tau_m_raw.value = Tensor<T>(Shape{dim});
    }

    Var<T> step(Tape<T>& tape, Var<T> x, LayerState<T>& state) {
        Shape like = tape.val(x).shape;  // copy: use() below may grow the tape
        Var<T> tau_m = sigmoid(tape, broadcast_like(tape, tape.use(tau_m_raw), like));
        Var<T> u = add(tape, state.u, mul(tape, tau_m, sub(tape, x, state.u)));
        state.u = u;
        return u;
    }

    LayerStateValues<T> zero_state(int batch) const { return zero_state_values(Shape{batch, dim}, u_r); }

    void collect(std::vector<Param<T>*>& out) { out.push_back(&tau_m_raw); }
};

}  // namespace evgaze
