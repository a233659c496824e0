// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// Independent scalar reference for the adaptive neuron equations. Plain
// double loops over flat vectors, written without the tensor/tape engine on
// purpose: this is the oracle the layer implementations are checked against.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace evgaze::testutil {

inline double ref_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Same-padding stride-1 convolution, (C,H,W) layout, weights (Co,Ci,k,k).
inline std::vector<double> ref_conv_same(const std::vector<double>& x, int C, int H, int W,
                                         const std::vector<double>& w, const std::vector<double>& bias, int k) {
    int pad = k / 2;
    std::vector<double> out(static_cast<std::size_t>(C) * H * W, 0.0);
    for (int co = 0; co < C; ++co)
        for (int oh = 0; oh < H; ++oh)
            for (int ow = 0; ow < W; ++ow) {
                double acc = bias[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < C; ++ci)
                    for (int r = 0; r < k; ++r) {
                        int ih = oh - pad + r;
                        if (ih < 0 || ih >= H) continue;
                        for (int c = 0; c < k; ++c) {
                            int iw = ow - pad + c;
                            if (iw < 0 || iw >= W) continue;
                            acc += x[(static_cast<std::size_t>(ci) * H + ih) * W + iw] *
                                   w[((static_cast<std::size_t>(co) * C + ci) * k + r) * k + c];
                        }
                    }
                out[(static_cast<std::size_t>(co) * H + oh) * W + ow] = acc;
            }
    return out;
}

/// y = W [a ++ b] + bias with W of shape (out, |a|+|b|).
inline std::vector<double> ref_linear_concat(const std::vector<double>& a, const std::vector<double>& b,
                                             const std::vector<double>& w, const std::vector<double>& bias,
                                             int out_dim) {
    std::size_t in = a.size() + b.size();
    std::vector<double> y(static_cast<std::size_t>(out_dim));
    for (int o = 0; o < out_dim; ++o) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (std::size_t i = 0; i < a.size(); ++i) acc += w[static_cast<std::size_t>(o) * in + i] * a[i];
        for (std::size_t i = 0; i < b.size(); ++i) acc += w[static_cast<std::size_t>(o) * in + a.size() + i] * b[i];
        y[static_cast<std::size_t>(o)] = acc;
    }
    return y;
}

struct RefDynamics {
    double b0 = 0.1;
    double beta = 1.8;
    double u_r = 0.0;
    bool reset = true;
};

/// Shared scalar update: membrane, adaptation, threshold, spike, reset.
inline void ref_neuron_update(const std::vector<double>& x, const std::vector<double>& tau_m,
                              const std::vector<double>& tau_adp, std::vector<double>& u, std::vector<double>& b,
                              std::vector<double>& s, const RefDynamics& nd) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        double un = u[i] + tau_m[i] * (x[i] - u[i]);
        double bn = tau_adp[i] * b[i] + (1.0 - tau_adp[i]) * s[i];
        double theta = nd.b0 + nd.beta * bn;
        double sn = un - theta >= 0.0 ? 1.0 : 0.0;
        if (nd.reset) un = un * (1.0 - sn) + nd.u_r * sn;
        u[i] = un;
        b[i] = bn;
        s[i] = sn;
    }
}

/// ALIF over a (C,H,W) map with convolutional liquid time constants.
struct RefAlif2d {
    int C, H, W, k;
    std::vector<double> wm, bm, wa, ba;
    RefDynamics nd;
    std::vector<double> u, b, s;

    void reset_state() {
        std::size_t n = static_cast<std::size_t>(C) * H * W;
        u.assign(n, nd.u_r);
        b.assign(n, 0.0);
        s.assign(n, 0.0);
    }

    std::vector<double> step(const std::vector<double>& x) {
        std::size_t n = x.size();
        std::vector<double> xu(n), xb(n);
        for (std::size_t i = 0; i < n; ++i) {
            xu[i] = x[i] + u[i];
            xb[i] = x[i] + b[i];
        }
        std::vector<double> tau_m = ref_conv_same(xu, C, H, W, wm, bm, k);
        std::vector<double> tau_adp = ref_conv_same(xb, C, H, W, wa, ba, k);
        for (std::size_t i = 0; i < n; ++i) {
            tau_m[i] = ref_sigmoid(tau_m[i]);
            tau_adp[i] = ref_sigmoid(tau_adp[i]);
        }
        ref_neuron_update(x, tau_m, tau_adp, u, b, s, nd);
        return s;
    }
};

/// ALIF over a feature vector with linear liquid time constants on the
/// concatenation of the tau input with the state.
struct RefAlif1d {
    int hidden;
    std::vector<double> wm, bm, wa, ba;
    RefDynamics nd;
    std::vector<double> u, b, s;

    void reset_state() {
        u.assign(static_cast<std::size_t>(hidden), nd.u_r);
        b.assign(static_cast<std::size_t>(hidden), 0.0);
        s.assign(static_cast<std::size_t>(hidden), 0.0);
    }

    std::vector<double> step(const std::vector<double>& x, const std::vector<double>& tau_x) {
        std::vector<double> tau_m = ref_linear_concat(tau_x, u, wm, bm, hidden);
        std::vector<double> tau_adp = ref_linear_concat(tau_x, b, wa, ba, hidden);
        for (int i = 0; i < hidden; ++i) {
            tau_m[static_cast<std::size_t>(i)] = ref_sigmoid(tau_m[static_cast<std::size_t>(i)]);
            tau_adp[static_cast<std::size_t>(i)] = ref_sigmoid(tau_adp[static_cast<std::size_t>(i)]);
        }
        ref_neuron_update(x, tau_m, tau_adp, u, b, s, nd);
        return s;
    }
};

/// PLIF: trained constants, sigmoid-squashed, input-independent.
struct RefPlif {
    std::vector<double> tau_m_raw, tau_adp_raw;  // one per channel/neuron
    int repeat = 1;                              // spatial size per channel for conv maps
    RefDynamics nd;
    std::vector<double> u, b, s;

    void reset_state() {
        std::size_t n = tau_m_raw.size() * static_cast<std::size_t>(repeat);
        u.assign(n, nd.u_r);
        b.assign(n, 0.0);
        s.assign(n, 0.0);
    }

    std::vector<double> step(const std::vector<double>& x) {
        std::size_t n = x.size();
        std::vector<double> tau_m(n), tau_adp(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t c = i / static_cast<std::size_t>(repeat);
            tau_m[i] = ref_sigmoid(tau_m_raw[c]);
            tau_adp[i] = ref_sigmoid(tau_adp_raw[c]);
        }
        ref_neuron_update(x, tau_m, tau_adp, u, b, s, nd);
        return s;
    }
};

}  // namespace evgaze::testutil
