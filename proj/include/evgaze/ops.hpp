// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations over Tape. Every op appends exactly one node;
// backward closures reference inputs by node id, never by pointer, because
// the node vector may reallocate while the forward pass is still recording.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "evgaze/rng.hpp"
#include "evgaze/tape.hpp"

namespace evgaze {

namespace detail {
template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape != b.shape)
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class T>
Var<T> add(Tape<T>& tape, Var<T> a, Var<T> b) {
    detail::check_same_shape(tape.val(a), tape.val(b), "add");
    Tensor<T> out = tape.val(a);
    const Tensor<T>& bv = tape.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    bool ng = tape.needs_grad(a) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [a, b](Tape<T>& tp, const Tensor<T>& g, int) {
                         tp.accum(a.id, g);
                         tp.accum(b.id, g);
                     },
                     ng);
}

template <class T>
Var<T> sub(Tape<T>& tape, Var<T> a, Var<T> b) {
    detail::check_same_shape(tape.val(a), tape.val(b), "sub");
    Tensor<T> out = tape.val(a);
    const Tensor<T>& bv = tape.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    bool ng = tape.needs_grad(a) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [a, b](Tape<T>& tp, const Tensor<T>& g, int) {
                         tp.accum(a.id, g);
                         Tensor<T> neg = g;
                         for (auto& x : neg.data) x = -x;
                         tp.accum(b.id, neg);
                     },
                     ng);
}

template <class T>
Var<T> mul(Tape<T>& tape, Var<T> a, Var<T> b) {
    detail::check_same_shape(tape.val(a), tape.val(b), "mul");
    Tensor<T> out = tape.val(a);
    const Tensor<T>& bv = tape.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    bool ng = tape.needs_grad(a) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [a, b](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& av = tp.val(a);
                         const Tensor<T>& bv2 = tp.val(b);
                         Tensor<T> da = g;
                         for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] *= bv2.data[i];
                         tp.accum(a.id, da);
                         Tensor<T> db = g;
                         for (std::size_t i = 0; i < db.data.size(); ++i) db.data[i] *= av.data[i];
                         tp.accum(b.id, db);
                     },
                     ng);
}

/// out = alpha * x + beta, elementwise with scalar coefficients.
template <class T>
Var<T> affine(Tape<T>& tape, Var<T> x, T alpha, T beta) {
    Tensor<T> out = tape.val(x);
    for (auto& v : out.data) v = alpha * v + beta;
    return tape.push(std::move(out),
                     [x, alpha](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx = g;
                         for (auto& v : dx.data) v *= alpha;
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

template <class T>
Var<T> one_minus(Tape<T>& tape, Var<T> x) {
    return affine(tape, x, T(-1), T(1));
}

template <class T>
Var<T> sigmoid(Tape<T>& tape, Var<T> x) {
    Tensor<T> out = tape.val(x);
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return tape.push(std::move(out),
                     [x](Tape<T>& tp, const Tensor<T>& g, int self) {
                         const Tensor<T>& s = tp.val(Var<T>{self});
                         Tensor<T> dx = g;
                         for (std::size_t i = 0; i < dx.data.size(); ++i)
                             dx.data[i] *= s.data[i] * (T(1) - s.data[i]);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

template <class T>
Var<T> sin_op(Tape<T>& tape, Var<T> x) {
    Tensor<T> out = tape.val(x);
    for (auto& v : out.data) v = std::sin(v);
    return tape.push(std::move(out),
                     [x](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& xv = tp.val(x);
                         Tensor<T> dx = g;
                         for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= std::cos(xv.data[i]);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

template <class T>
Var<T> cos_op(Tape<T>& tape, Var<T> x) {
    Tensor<T> out = tape.val(x);
    for (auto& v : out.data) v = std::cos(v);
    return tape.push(std::move(out),
                     [x](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& xv = tp.val(x);
                         Tensor<T> dx = g;
                         for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= -std::sin(xv.data[i]);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

// ---------------------------------------------------------------------------
// Spike nonlinearity
// ---------------------------------------------------------------------------

/// Surrogate for the Heaviside spike. Forward is the step function (or the
/// Gaussian CDF when smooth_twin is set, which makes the whole network
/// differentiable for finite-difference checks); backward multiplies by a
/// Gaussian of width sigma centered on the threshold crossing.
template <class T>
struct SurrogateConfig {
    T sigma = T(0.5);
    T scale = T(1);
    bool smooth_twin = false;
};

template <class T>
Var<T> spike(Tape<T>& tape, Var<T> u_minus_theta, const SurrogateConfig<T>& sg) {
    if (sg.sigma <= T(0)) throw ConfigError("spike: surrogate width must be > 0");
    Tensor<T> out = tape.val(u_minus_theta);
    if (sg.smooth_twin) {
        T inv = T(1) / (sg.sigma * T(std::sqrt(2.0)));
        for (auto& v : out.data) v = T(0.5) * std::erfc(-v * inv);
    } else {
        for (auto& v : out.data) v = v >= T(0) ? T(1) : T(0);
    }
    T sigma = sg.sigma;
    T scale = sg.smooth_twin ? T(1) : sg.scale;
    return tape.push(std::move(out),
                     [u_minus_theta, sigma, scale](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& d = tp.val(u_minus_theta);
                         T norm = scale * T(detail::kInvSqrt2Pi) / sigma;
                         Tensor<T> dx = g;
                         for (std::size_t i = 0; i < dx.data.size(); ++i) {
                             T z = d.data[i] / sigma;
                             dx.data[i] *= norm * std::exp(T(-0.5) * z * z);
                         }
                         tp.accum(u_minus_theta.id, dx);
                     },
                     tape.needs_grad(u_minus_theta));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// x:(N,I) w:(O,I) b:(O) -> (N,O)
template <class T>
Var<T> linear(Tape<T>& tape, Var<T> x, Var<T> w, Var<T> b) {
    const Tensor<T>& xv = tape.val(x);
    const Tensor<T>& wv = tape.val(w);
    const Tensor<T>& bv = tape.val(b);
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(1) || wv.dim(0) != bv.dim(0))
        throw ConfigError("linear: shape mismatch x" + shape_str(xv.shape) + " w" + shape_str(wv.shape) + " b" +
                          shape_str(bv.shape));
    int N = xv.dim(0), I = xv.dim(1), O = wv.dim(0);
    Tensor<T> out(Shape{N, O});
    for (int n = 0; n < N; ++n) {
        const T* xr = &xv.data[static_cast<std::size_t>(n) * I];
        T* or_ = &out.data[static_cast<std::size_t>(n) * O];
        for (int o = 0; o < O; ++o) {
            const T* wr = &wv.data[static_cast<std::size_t>(o) * I];
            T acc = bv.data[static_cast<std::size_t>(o)];
            for (int i = 0; i < I; ++i) acc += xr[i] * wr[i];
            or_[o] = acc;
        }
    }
    bool ng = tape.needs_grad(x) || tape.needs_grad(w) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [x, w, b, N, I, O](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& xv2 = tp.val(x);
                         const Tensor<T>& wv2 = tp.val(w);
                         Tensor<T> dx(Shape{N, I});
                         Tensor<T> dw(Shape{O, I});
                         Tensor<T> db(Shape{O});
                         for (int n = 0; n < N; ++n) {
                             const T* gr = &g.data[static_cast<std::size_t>(n) * O];
                             const T* xr = &xv2.data[static_cast<std::size_t>(n) * I];
                             T* dxr = &dx.data[static_cast<std::size_t>(n) * I];
                             for (int o = 0; o < O; ++o) {
                                 T gv = gr[o];
                                 if (gv == T(0)) continue;
                                 const T* wr = &wv2.data[static_cast<std::size_t>(o) * I];
                                 T* dwr = &dw.data[static_cast<std::size_t>(o) * I];
                                 for (int i = 0; i < I; ++i) {
                                     dxr[i] += gv * wr[i];
                                     dwr[i] += gv * xr[i];
                                 }
                                 db.data[static_cast<std::size_t>(o)] += gv;
                             }
                         }
                         tp.accum(x.id, dx);
                         tp.accum(w.id, dw);
                         tp.accum(b.id, db);
                     },
                     ng);
}

/// x:(N,Ci,H,W) w:(Co,Ci,kh,kw) b:(Co), cross-correlation with stride/padding.
template <class T>
Var<T> conv2d(Tape<T>& tape, Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
    const Tensor<T>& xv = tape.val(x);
    const Tensor<T>& wv = tape.val(w);
    const Tensor<T>& bv = tape.val(b);
    if (stride < 1 || pad < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
    if (xv.rank() != 4 || wv.rank() != 4 || bv.rank() != 1 || xv.dim(1) != wv.dim(1) || wv.dim(0) != bv.dim(0))
        throw ConfigError("conv2d: shape mismatch x" + shape_str(xv.shape) + " w" + shape_str(wv.shape));
    int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    int Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1) throw ConfigError("conv2d: kernel larger than padded input");
    Tensor<T> out(Shape{N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow) {
                    T acc = bv.data[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int r = 0; r < kh; ++r) {
                            int ih = oh * stride - pad + r;
                            if (ih < 0 || ih >= H) continue;
                            for (int c = 0; c < kw; ++c) {
                                int iw = ow * stride - pad + c;
                                if (iw < 0 || iw >= W) continue;
                                acc += xv.at4(n, ci, ih, iw) * wv.at4(co, ci, r, c);
                            }
                        }
                    out.at4(n, co, oh, ow) = acc;
                }
    bool ng = tape.needs_grad(x) || tape.needs_grad(w) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [x, w, b, stride, pad, N, Ci, H, W, Co, kh, kw, Ho, Wo](Tape<T>& tp, const Tensor<T>& g, int) {
                         const Tensor<T>& xv2 = tp.val(x);
                         const Tensor<T>& wv2 = tp.val(w);
                         Tensor<T> dx(Shape{N, Ci, H, W});
                         Tensor<T> dw(Shape{Co, Ci, kh, kw});
                         Tensor<T> db(Shape{Co});
                         for (int n = 0; n < N; ++n)
                             for (int co = 0; co < Co; ++co)
                                 for (int oh = 0; oh < Ho; ++oh)
                                     for (int ow = 0; ow < Wo; ++ow) {
                                         T gv = g.at4(n, co, oh, ow);
                                         if (gv == T(0)) continue;
                                         db.data[static_cast<std::size_t>(co)] += gv;
                                         for (int ci = 0; ci < Ci; ++ci)
                                             for (int r = 0; r < kh; ++r) {
                                                 int ih = oh * stride - pad + r;
                                                 if (ih < 0 || ih >= H) continue;
                                                 for (int c = 0; c < kw; ++c) {
                                                     int iw = ow * stride - pad + c;
                                                     if (iw < 0 || iw >= W) continue;
                                                     dx.at4(n, ci, ih, iw) += gv * wv2.at4(co, ci, r, c);
                                                     dw.at4(co, ci, r, c) += gv * xv2.at4(n, ci, ih, iw);
                                                 }
                                             }
                                     }
                         tp.accum(x.id, dx);
                         tp.accum(w.id, dw);
                         tp.accum(b.id, db);
                     },
                     ng);
}

/// 2x2 (or k x k) max pooling with stride k; odd remainders truncate.
template <class T>
Var<T> maxpool2d(Tape<T>& tape, Var<T> x, int k) {
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4) throw ConfigError("maxpool2d: expected 4-D input");
    if (k < 1) throw ConfigError("maxpool2d: k must be >= 1");
    int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    int Ho = H / k, Wo = W / k;
    if (Ho < 1 || Wo < 1) throw ConfigError("maxpool2d: input smaller than pooling window");
    Tensor<T> out(Shape{N, C, Ho, Wo});
    std::vector<std::int64_t> argmax(out.data.size());
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow, ++oi) {
                    T best = xv.at4(n, c, oh * k, ow * k);
                    std::int64_t best_idx = ((static_cast<std::int64_t>(n) * C + c) * H + oh * k) * W + ow * k;
                    for (int r = 0; r < k; ++r)
                        for (int s = 0; s < k; ++s) {
                            std::int64_t idx = ((static_cast<std::int64_t>(n) * C + c) * H + oh * k + r) * W + ow * k + s;
                            T v = xv.data[static_cast<std::size_t>(idx)];
                            if (v > best) {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    out.data[oi] = best;
                    argmax[oi] = best_idx;
                }
    return tape.push(std::move(out),
                     [x, argmax = std::move(argmax), N, C, H, W](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(Shape{N, C, H, W});
                         for (std::size_t i = 0; i < g.data.size(); ++i)
                             dx.data[static_cast<std::size_t>(argmax[i])] += g.data[i];
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

// ---------------------------------------------------------------------------
// Normalization / regularization
// ---------------------------------------------------------------------------

enum class Mode { train, eval };

/// Batch normalization with one stat per channel. Conv inputs (N,C,H,W)
/// normalize over batch and spatial dims; 2-D inputs (N,F) over batch only.
/// Train mode uses current-batch statistics (biased variance) and updates the
/// caller-owned running buffers in place; eval mode uses the running buffers.
template <class T>
Var<T> batchnorm(Tape<T>& tape, Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean,
                 Tensor<T>& running_var, Mode mode, T eps, T momentum) {
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 2 && xv.rank() != 4) throw ConfigError("batchnorm: expected 2-D or 4-D input");
    int N = xv.dim(0);
    int C = xv.dim(1);
    std::int64_t S = xv.rank() == 4 ? static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3) : 1;
    const Tensor<T>& gv = tape.val(gamma);
    const Tensor<T>& bv = tape.val(beta);
    if (gv.numel() != C || bv.numel() != C || running_mean.numel() != C || running_var.numel() != C)
        throw ConfigError("batchnorm: parameter size does not match channel count");
    std::int64_t M = static_cast<std::int64_t>(N) * S;

    std::vector<T> mean(static_cast<std::size_t>(C)), var(static_cast<std::size_t>(C));
    if (mode == Mode::train) {
        for (int c = 0; c < C; ++c) {
            T m = 0;
            for (int n = 0; n < N; ++n) {
                const T* p = &xv.data[(static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S)];
                for (std::int64_t s = 0; s < S; ++s) m += p[s];
            }
            m /= static_cast<T>(M);
            T v = 0;
            for (int n = 0; n < N; ++n) {
                const T* p = &xv.data[(static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S)];
                for (std::int64_t s = 0; s < S; ++s) {
                    T d = p[s] - m;
                    v += d * d;
                }
            }
            v /= static_cast<T>(M);
            mean[static_cast<std::size_t>(c)] = m;
            var[static_cast<std::size_t>(c)] = v;
            running_mean.data[static_cast<std::size_t>(c)] = (T(1) - momentum) * running_mean.data[static_cast<std::size_t>(c)] + momentum * m;
            running_var.data[static_cast<std::size_t>(c)] = (T(1) - momentum) * running_var.data[static_cast<std::size_t>(c)] + momentum * v;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = running_mean.data[static_cast<std::size_t>(c)];
            var[static_cast<std::size_t>(c)] = running_var.data[static_cast<std::size_t>(c)];
        }
    }

    Tensor<T> xhat(xv.shape);
    Tensor<T> out(xv.shape);
    std::vector<T> ivar(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c)
        ivar[static_cast<std::size_t>(c)] = T(1) / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
            T m = mean[static_cast<std::size_t>(c)], iv = ivar[static_cast<std::size_t>(c)];
            T ga = gv.data[static_cast<std::size_t>(c)], be = bv.data[static_cast<std::size_t>(c)];
            for (std::int64_t s = 0; s < S; ++s) {
                T xh = (xv.data[base + static_cast<std::size_t>(s)] - m) * iv;
                xhat.data[base + static_cast<std::size_t>(s)] = xh;
                out.data[base + static_cast<std::size_t>(s)] = ga * xh + be;
            }
        }

    bool train_stats = mode == Mode::train;
    bool ng = tape.needs_grad(x) || tape.needs_grad(gamma) || tape.needs_grad(beta);
    return tape.push(
        std::move(out),
        [x, gamma, beta, xhat = std::move(xhat), ivar = std::move(ivar), N, C, S, M,
         train_stats](Tape<T>& tp, const Tensor<T>& g, int) {
            const Tensor<T>& gv2 = tp.val(gamma);
            Tensor<T> dgamma(Shape{C});
            Tensor<T> dbeta(Shape{C});
            Tensor<T> dx(tp.val(x).shape);
            for (int c = 0; c < C; ++c) {
                T sum_g = 0, sum_gx = 0;
                for (int n = 0; n < N; ++n) {
                    std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
                    for (std::int64_t s = 0; s < S; ++s) {
                        T gu = g.data[base + static_cast<std::size_t>(s)];
                        sum_g += gu;
                        sum_gx += gu * xhat.data[base + static_cast<std::size_t>(s)];
                    }
                }
                dgamma.data[static_cast<std::size_t>(c)] = sum_gx;
                dbeta.data[static_cast<std::size_t>(c)] = sum_g;
                T ga = gv2.data[static_cast<std::size_t>(c)];
                T iv = ivar[static_cast<std::size_t>(c)];
                if (train_stats) {
                    // dx = (gamma*ivar/M) * (M*g - sum_g - xhat*sum_gx)
                    T k = ga * iv / static_cast<T>(M);
                    for (int n = 0; n < N; ++n) {
                        std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
                        for (std::int64_t s = 0; s < S; ++s) {
                            std::size_t i = base + static_cast<std::size_t>(s);
                            dx.data[i] = k * (static_cast<T>(M) * g.data[i] - sum_g - xhat.data[i] * sum_gx);
                        }
                    }
                } else {
                    T k = ga * iv;
                    for (int n = 0; n < N; ++n) {
                        std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
                        for (std::int64_t s = 0; s < S; ++s) {
                            std::size_t i = base + static_cast<std::size_t>(s);
                            dx.data[i] = k * g.data[i];
                        }
                    }
                }
            }
            tp.accum(x.id, dx);
            tp.accum(gamma.id, dgamma);
            tp.accum(beta.id, dbeta);
        },
        ng);
}

/// Inverted dropout. The mask is a pure function of (seed, nonce), so a
/// repeated forward with the same nonce is bit-identical — required for
/// finite-difference checks and determinism.
template <class T>
Var<T> dropout(Tape<T>& tape, Var<T> x, double rate, Mode mode, std::uint64_t seed, std::uint64_t nonce) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) {
        Tensor<T> out = tape.val(x);
        return tape.push(std::move(out),
                         [x](Tape<T>& tp, const Tensor<T>& g, int) { tp.accum(x.id, g); },
                         tape.needs_grad(x));
    }
    const Tensor<T>& xv = tape.val(x);
    Rng rng(Rng::derive(seed, nonce));
    std::vector<char> keep(xv.data.size());
    T scale = T(1) / T(1 - rate);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < xv.data.size(); ++i) {
        keep[i] = rng.uniform01() >= rate ? 1 : 0;
        out.data[i] = keep[i] ? xv.data[i] * scale : T(0);
    }
    return tape.push(std::move(out),
                     [x, keep = std::move(keep), scale](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx = g;
                         for (std::size_t i = 0; i < dx.data.size(); ++i)
                             dx.data[i] = keep[i] ? dx.data[i] * scale : T(0);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

template <class T>
Var<T> reshape(Tape<T>& tape, Var<T> x, Shape shape) {
    const Tensor<T>& xv = tape.val(x);
    if (shape_numel(shape) != xv.numel())
        throw ConfigError("reshape: element count mismatch " + shape_str(xv.shape) + " -> " + shape_str(shape));
    Tensor<T> out(shape, xv.data);
    Shape in_shape = xv.shape;
    return tape.push(std::move(out),
                     [x, in_shape](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(in_shape, g.data);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

/// (N,C,H,W) -> (N, C*H*W)
template <class T>
Var<T> flatten(Tape<T>& tape, Var<T> x) {
    const Tensor<T>& xv = tape.val(x);
    int N = xv.dim(0);
    return reshape(tape, x, Shape{N, static_cast<int>(xv.numel() / N)});
}

/// Concatenate along axis 1: (N,Fa) ++ (N,Fb) -> (N,Fa+Fb)
template <class T>
Var<T> concat_cols(Tape<T>& tape, Var<T> a, Var<T> b) {
    const Tensor<T>& av = tape.val(a);
    const Tensor<T>& bv = tape.val(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
        throw ConfigError("concat_cols: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    int N = av.dim(0), Fa = av.dim(1), Fb = bv.dim(1);
    Tensor<T> out(Shape{N, Fa + Fb});
    for (int n = 0; n < N; ++n) {
        std::copy_n(&av.data[static_cast<std::size_t>(n) * Fa], Fa, &out.data[static_cast<std::size_t>(n) * (Fa + Fb)]);
        std::copy_n(&bv.data[static_cast<std::size_t>(n) * Fb], Fb, &out.data[static_cast<std::size_t>(n) * (Fa + Fb) + static_cast<std::size_t>(Fa)]);
    }
    bool ng = tape.needs_grad(a) || tape.needs_grad(b);
    return tape.push(std::move(out),
                     [a, b, N, Fa, Fb](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> da(Shape{N, Fa});
                         Tensor<T> db(Shape{N, Fb});
                         for (int n = 0; n < N; ++n) {
                             std::copy_n(&g.data[static_cast<std::size_t>(n) * (Fa + Fb)], Fa, &da.data[static_cast<std::size_t>(n) * Fa]);
                             std::copy_n(&g.data[static_cast<std::size_t>(n) * (Fa + Fb) + static_cast<std::size_t>(Fa)], Fb, &db.data[static_cast<std::size_t>(n) * Fb]);
                         }
                         tp.accum(a.id, da);
                         tp.accum(b.id, db);
                     },
                     ng);
}

/// Columns [c0, c1) of a (N,F) tensor.
template <class T>
Var<T> slice_cols(Tape<T>& tape, Var<T> x, int c0, int c1) {
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 2 || c0 < 0 || c1 > xv.dim(1) || c0 >= c1)
        throw ConfigError("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) + ") for " +
                          shape_str(xv.shape));
    int N = xv.dim(0), F = xv.dim(1), K = c1 - c0;
    Tensor<T> out(Shape{N, K});
    for (int n = 0; n < N; ++n)
        std::copy_n(&xv.data[static_cast<std::size_t>(n) * F + static_cast<std::size_t>(c0)], K,
                    &out.data[static_cast<std::size_t>(n) * K]);
    return tape.push(std::move(out),
                     [x, c0, N, F, K](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(Shape{N, F});
                         for (int n = 0; n < N; ++n)
                             std::copy_n(&g.data[static_cast<std::size_t>(n) * K], K,
                                         &dx.data[static_cast<std::size_t>(n) * F + static_cast<std::size_t>(c0)]);
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

/// Broadcast a per-channel vector (C) to (N,C,H,W) or per-feature (F) to
/// (N,F). `like` is taken by value: callers typically pass a shape read off
/// the tape, which another argument's push may reallocate from under a
/// reference.
template <class T>
Var<T> broadcast_like(Tape<T>& tape, Var<T> p, Shape like) {
    const Tensor<T>& pv = tape.val(p);
    if (like.size() != 2 && like.size() != 4) throw ConfigError("broadcast_like: target must be 2-D or 4-D");
    int C = like[1];
    if (pv.numel() != C) throw ConfigError("broadcast_like: size mismatch");
    int N = like[0];
    std::int64_t S = like.size() == 4 ? static_cast<std::int64_t>(like[2]) * like[3] : 1;
    Tensor<T> out(like);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
            T v = pv.data[static_cast<std::size_t>(c)];
            for (std::int64_t s = 0; s < S; ++s) out.data[base + static_cast<std::size_t>(s)] = v;
        }
    return tape.push(std::move(out),
                     [p, N, C, S](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dp(Shape{C});
                         for (int n = 0; n < N; ++n)
                             for (int c = 0; c < C; ++c) {
                                 std::size_t base = (static_cast<std::size_t>(n) * C + static_cast<std::size_t>(c)) * static_cast<std::size_t>(S);
                                 T acc = 0;
                                 for (std::int64_t s = 0; s < S; ++s) acc += g.data[base + static_cast<std::size_t>(s)];
                                 dp.data[static_cast<std::size_t>(c)] += acc;
                             }
                         tp.accum(p.id, dp);
                     },
                     tape.needs_grad(p));
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class T>
Var<T> sum_all(Tape<T>& tape, Var<T> x) {
    const Tensor<T>& xv = tape.val(x);
    T acc = 0;
    for (T v : xv.data) acc += v;
    return tape.push(Tensor<T>::scalar(acc),
                     [x](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(tp.val(x).shape);
                         for (auto& v : dx.data) v = g.data[0];
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

template <class T>
Var<T> mean_all(Tape<T>& tape, Var<T> x) {
    const Tensor<T>& xv = tape.val(x);
    return affine(tape, sum_all(tape, x), T(1) / static_cast<T>(xv.numel()), T(0));
}

/// Mean along axis 1: (N,K) -> (N,1).
template <class T>
Var<T> row_mean(Tape<T>& tape, Var<T> x) {
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 2) throw ConfigError("row_mean: expected 2-D input");
    int N = xv.dim(0), K = xv.dim(1);
    Tensor<T> out(Shape{N, 1});
    for (int n = 0; n < N; ++n) {
        T acc = 0;
        for (int k = 0; k < K; ++k) acc += xv.data[static_cast<std::size_t>(n) * K + static_cast<std::size_t>(k)];
        out.data[static_cast<std::size_t>(n)] = acc / static_cast<T>(K);
    }
    return tape.push(std::move(out),
                     [x, N, K](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(Shape{N, K});
                         for (int n = 0; n < N; ++n) {
                             T gv = g.data[static_cast<std::size_t>(n)] / static_cast<T>(K);
                             for (int k = 0; k < K; ++k) dx.data[static_cast<std::size_t>(n) * K + static_cast<std::size_t>(k)] = gv;
                         }
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

/// Fixed-weight reduction of per-row scalars: (N,1) . w -> scalar.
template <class T>
Var<T> weighted_sum(Tape<T>& tape, Var<T> x, std::vector<T> weights) {
    const Tensor<T>& xv = tape.val(x);
    if (xv.numel() != static_cast<std::int64_t>(weights.size()))
        throw ConfigError("weighted_sum: weight count mismatch");
    T acc = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * xv.data[i];
    return tape.push(Tensor<T>::scalar(acc),
                     [x, weights = std::move(weights)](Tape<T>& tp, const Tensor<T>& g, int) {
                         Tensor<T> dx(tp.val(x).shape);
                         for (std::size_t i = 0; i < weights.size(); ++i) dx.data[i] = weights[i] * g.data[0];
                         tp.accum(x.id, dx);
                     },
                     tape.needs_grad(x));
}

}  // namespace evgaze
