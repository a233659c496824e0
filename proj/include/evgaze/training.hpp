// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0
//
// Loss, metrics, and the sequence trainers. Both trainers step through
// non-overlapping windows of T frames, carrying neuron state across windows
// and detaching it at every boundary, so retained tape size depends on T
// only, never on sequence length:
//
//   tbptt: accumulate the masked loss over the window, backpropagate at the
//          window end, one SGD step.
//   fptt:  the same windowed pass plus the running-average regularizer
//          l~ = l + (alpha/2)||theta - theta_bar||^2, followed by
//          theta_bar <- (theta_bar + theta_new)/2 - grad_l(theta_old)/(2 alpha).

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>

#include "evgaze/framing.hpp"
#include "evgaze/gaze.hpp"
#include "evgaze/model.hpp"

namespace evgaze {

struct LossConfig {
    double lambda_p = 0.1;  // pupil MSE weight (standardized origin units)
    double lambda_a = 1.0;  // cosine-distance weight
};

enum class TrainMethod { tbptt, fptt, fptt_tbptt };

struct TrainConfig {
    TrainMethod method = TrainMethod::fptt;
    int bptt_steps = 8;  // T: window length in frames
    double alpha = 0.1;  // FPTT regularization strength
    double lr = 1e-3;
    double momentum = 0.9;
    int epochs = 1;
    int batch = 2;
    std::uint64_t seed = 42;
    LossConfig loss;
    std::int64_t max_updates = -1;  // stop after N optimizer updates; -1 = no cap
    bool fptt_bar_update = true;    // test hook: disabling it with alpha ~ 0 degenerates to tbptt
};

struct Metrics {
    double loss = 0.0;
    double mae_deg = 0.0;
    double mpe_mm = 0.0;
    double mfr = 0.0;
    std::int64_t frames_counted = 0;
};

inline void validate_train_config(const TrainConfig& c) {
    if (c.bptt_steps < 1) throw ConfigError("training: bptt_steps must be >= 1");
    if (c.method != TrainMethod::tbptt && c.alpha <= 0.0 && c.fptt_bar_update)
        throw ConfigError("training: alpha must be > 0 when FPTT is active");
    if (c.lr < 0.0) throw ConfigError("training: learning rate must be >= 0");
    if (c.epochs < 1) throw ConfigError("training: epochs must be >= 1");
    if (c.batch < 1) throw ConfigError("training: batch size must be >= 1");
    if (c.loss.lambda_p < 0.0 || c.loss.lambda_a < 0.0 || (c.loss.lambda_p == 0.0 && c.loss.lambda_a == 0.0))
        throw ConfigError("training: loss weights must be >= 0 and not both 0");
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Reference scalar loss for one prediction, in the network's output
/// convention: channels 0..2 are the standardized origin, 3..4 the angles in
/// degrees. Targets are standardized with the same constants.
inline double compute_loss(const std::array<double, 5>& pred, const GazeSample& target, const LossConfig& cfg,
                           const std::array<double, 5>& t_mean, const std::array<double, 5>& t_std) {
    double mse = 0.0;
    for (int k = 0; k < 3; ++k) {
        double tgt = (target.origin[static_cast<std::size_t>(k)] - t_mean[static_cast<std::size_t>(k)]) / t_std[static_cast<std::size_t>(k)];
        double d = pred[static_cast<std::size_t>(k)] - tgt;
        mse += d * d;
    }
    mse /= 3.0;
    auto pu = spherical_to_unit(pred[3], pred[4]);
    auto tu = spherical_to_unit(target.phi, target.psi);
    double cosg = pu[0] * tu[0] + pu[1] * tu[1] + pu[2] * tu[2];
    return cfg.lambda_p * mse + cfg.lambda_a * (1.0 - cosg);
}

namespace detail {
inline constexpr double kDegToRadLoss = 3.14159265358979323846 / 180.0;
}

/// Tape version of the same loss for one batched frame. Returns the
/// mask-weighted SUM of per-row losses (caller normalizes by the unmasked
/// count) and adds the row count to *weight_total. Masked rows get weight 0.
template <class T>
Var<T> frame_loss(Tape<T>& tape, Var<T> pred, const std::vector<const AlignedTarget*>& targets,
                  const Tensor<T>& t_mean, const Tensor<T>& t_std, const LossConfig& cfg, double* weight_total) {
    const Tensor<T>& pv = tape.val(pred);
    int N = pv.dim(0);
    if (pv.rank() != 2 || pv.dim(1) != 5 || static_cast<int>(targets.size()) != N)
        throw ConfigError("frame_loss: prediction must be (N,5) with one target per row");

    std::vector<T> w(static_cast<std::size_t>(N));
    Tensor<T> std_origin(Shape{N, 3});
    Tensor<T> tux(Shape{N, 1}), tuy(Shape{N, 1}), tuz(Shape{N, 1});
    for (int n = 0; n < N; ++n) {
        const AlignedTarget& at = *targets[static_cast<std::size_t>(n)];
        w[static_cast<std::size_t>(n)] = at.masked ? T(0) : T(1);
        if (!at.masked) *weight_total += 1.0;
        for (int k = 0; k < 3; ++k)
            std_origin.at2(n, k) = static_cast<T>((at.target.origin[static_cast<std::size_t>(k)] -
                                                   static_cast<double>(t_mean.data[static_cast<std::size_t>(k)])) /
                                                  static_cast<double>(t_std.data[static_cast<std::size_t>(k)]));
        auto tu = spherical_to_unit(at.target.phi, at.target.psi);
        tux.data[static_cast<std::size_t>(n)] = static_cast<T>(tu[0]);
        tuy.data[static_cast<std::size_t>(n)] = static_cast<T>(tu[1]);
        tuz.data[static_cast<std::size_t>(n)] = static_cast<T>(tu[2]);
    }

    Var<T> origin = slice_cols(tape, pred, 0, 3);
    Var<T> diff = sub(tape, origin, tape.constant(std::move(std_origin)));
    Var<T> mse = row_mean(tape, mul(tape, diff, diff));

    Var<T> phir = affine(tape, slice_cols(tape, pred, 3, 4), T(detail::kDegToRadLoss), T(0));
    Var<T> psir = affine(tape, slice_cols(tape, pred, 4, 5), T(detail::kDegToRadLoss), T(0));
    Var<T> cpsi = cos_op(tape, psir);
    Var<T> ux = mul(tape, cpsi, sin_op(tape, phir));
    Var<T> uy = sin_op(tape, psir);
    Var<T> uz = mul(tape, cpsi, cos_op(tape, phir));
    Var<T> dot = add(tape, add(tape, mul(tape, ux, tape.constant(std::move(tux))), mul(tape, uy, tape.constant(std::move(tuy)))),
                     mul(tape, uz, tape.constant(std::move(tuz))));
    Var<T> cos_dist = affine(tape, dot, T(-1), T(1));

    Var<T> per_row = add(tape, affine(tape, mse, static_cast<T>(cfg.lambda_p), T(0)),
                         affine(tape, cos_dist, static_cast<T>(cfg.lambda_a), T(0)));
    return weighted_sum(tape, per_row, std::move(w));
}

// ---------------------------------------------------------------------------
// Data plumbing
// ---------------------------------------------------------------------------

/// Stack one frame from each batched chunk into a (N,2,H,W) input tensor.
template <class T>
Tensor<T> frames_to_tensor(const std::vector<const SequenceChunk*>& batch, std::size_t t, int width, int height,
                           bool binarize) {
    int N = static_cast<int>(batch.size());
    Tensor<T> out(Shape{N, 2, height, width});
    std::size_t per = 2 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    for (int n = 0; n < N; ++n) {
        const Frame& f = batch[static_cast<std::size_t>(n)]->frames[t];
        if (f.data.size() != per) throw DataError("frames_to_tensor: frame size does not match geometry");
        T* dst = &out.data[static_cast<std::size_t>(n) * per];
        for (std::size_t i = 0; i < per; ++i)
            dst[i] = binarize ? (f.data[i] > 0 ? T(1) : T(0)) : static_cast<T>(f.data[i]);
    }
    return out;
}

/// Origin standardization constants from the unmasked training targets;
/// angles pass through (mean 0, std 1).
template <class T>
void fit_target_standardization(Model<T>& m, const std::vector<SequenceChunk>& train_chunks) {
    std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
    std::int64_t n = 0;
    for (const auto& chunk : train_chunks)
        for (const auto& at : chunk.targets) {
            if (at.masked) continue;
            for (int k = 0; k < 3; ++k) {
                sum[static_cast<std::size_t>(k)] += at.target.origin[static_cast<std::size_t>(k)];
                sumsq[static_cast<std::size_t>(k)] += at.target.origin[static_cast<std::size_t>(k)] * at.target.origin[static_cast<std::size_t>(k)];
            }
            ++n;
        }
    m.target_mean = Tensor<T>::zeros(Shape{5});
    m.target_std = Tensor<T>::full(Shape{5}, T(1));
    if (n == 0) return;
    for (int k = 0; k < 3; ++k) {
        double mean = sum[static_cast<std::size_t>(k)] / static_cast<double>(n);
        double var = sumsq[static_cast<std::size_t>(k)] / static_cast<double>(n) - mean * mean;
        double sd = var > 1e-18 ? std::sqrt(var) : 1.0;
        m.target_mean.data[static_cast<std::size_t>(k)] = static_cast<T>(mean);
        m.target_std.data[static_cast<std::size_t>(k)] = static_cast<T>(sd);
    }
}

/// De-standardize one output row into (origin mm, angles deg).
template <class T>
std::array<double, 5> destandardize(const Model<T>& m, const Tensor<T>& pred, int row) {
    std::array<double, 5> out{};
    for (int k = 0; k < 5; ++k)
        out[static_cast<std::size_t>(k)] = static_cast<double>(pred.at2(row, k)) * static_cast<double>(m.target_std.data[static_cast<std::size_t>(k)]) +
                                           static_cast<double>(m.target_mean.data[static_cast<std::size_t>(k)]);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics accumulation
// ---------------------------------------------------------------------------

/// Accumulates MAE/MPE/loss over unmasked frames and MFR over every
/// (step, spiking layer) pair.
class MetricsAccumulator {
  public:
    void add_prediction(const std::array<double, 5>& pred_destd, const std::array<double, 5>& pred_raw,
                        const AlignedTarget& at, const LossConfig& loss_cfg, const std::array<double, 5>& t_mean,
                        const std::array<double, 5>& t_std) {
        if (at.masked) return;
        sum_angle_ += angle_error(pred_destd[3], pred_destd[4], at.target.phi, at.target.psi);
        sum_pupil_ += pupil_error({pred_destd[0], pred_destd[1], pred_destd[2]}, at.target.origin);
        sum_loss_ += compute_loss(pred_raw, at.target, loss_cfg, t_mean, t_std);
        ++counted_;
    }

    void add_spike_stats(const std::vector<SpikeStat>& stats) {
        for (const auto& s : stats) {
            mfr_sum_ += s.ratio();
            ++mfr_terms_;
        }
    }

    std::int64_t counted() const { return counted_; }

    Metrics finish() const {
        Metrics m;
        m.frames_counted = counted_;
        if (counted_ > 0) {
            m.mae_deg = sum_angle_ / static_cast<double>(counted_);
            m.mpe_mm = sum_pupil_ / static_cast<double>(counted_);
            m.loss = sum_loss_ / static_cast<double>(counted_);
        }
        if (mfr_terms_ > 0) m.mfr = mfr_sum_ / static_cast<double>(mfr_terms_);
        return m;
    }

  private:
    double sum_angle_ = 0, sum_pupil_ = 0, sum_loss_ = 0, mfr_sum_ = 0;
    std::int64_t counted_ = 0, mfr_terms_ = 0;
};

template <class T>
std::array<double, 5> standardization_mean(const Model<T>& m) {
    std::array<double, 5> a{};
    for (int k = 0; k < 5; ++k) a[static_cast<std::size_t>(k)] = static_cast<double>(m.target_mean.data[static_cast<std::size_t>(k)]);
    return a;
}
template <class T>
std::array<double, 5> standardization_std(const Model<T>& m) {
    std::array<double, 5> a{};
    for (int k = 0; k < 5; ++k) a[static_cast<std::size_t>(k)] = static_cast<double>(m.target_std.data[static_cast<std::size_t>(k)]);
    return a;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

template <class T>
class SgdMomentum {
  public:
    SgdMomentum(double lr, double momentum) : lr_(static_cast<T>(lr)), momentum_(static_cast<T>(momentum)) {}

    void step(const std::vector<Param<T>*>& params) {
        if (velocity_.size() != params.size()) {
            velocity_.clear();
            for (auto* p : params) velocity_.push_back(Tensor<T>::zeros(p->value.shape));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i];
            const Tensor<T>& g = p.grad_or_zero();
            Tensor<T>& v = velocity_[i];
            for (std::size_t k = 0; k < v.data.size(); ++k) {
                v.data[k] = momentum_ * v.data[k] + g.data[k];
                p.value.data[k] -= lr_ * v.data[k];
            }
        }
    }

  private:
    T lr_, momentum_;
    std::vector<Tensor<T>> velocity_;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Runs each chunk with fresh state in eval mode. The tape records nothing
/// and is reset every step, so memory stays flat.
template <class T>
Metrics evaluate(Model<T>& m, const std::vector<SequenceChunk>& chunks, int width, int height, bool binarize,
                 const LossConfig& loss_cfg) {
    MetricsAccumulator acc;
    Tape<T> tape;
    tape.set_recording(false);
    auto t_mean = standardization_mean(m);
    auto t_std = standardization_std(m);
    for (const auto& chunk : chunks) {
        ModelStateValues<T> sv = m.zero_state(1);
        std::vector<const SequenceChunk*> batch{&chunk};
        for (std::size_t t = 0; t < chunk.frames.size(); ++t) {
            ModelState<T> state = m.attach(tape, sv);
            Var<T> x = tape.constant(frames_to_tensor<T>(batch, t, width, height, binarize));
            std::vector<SpikeStat> stats;
            Var<T> pred = m.forward_step(tape, x, state, Mode::eval, 0, &stats);
            const Tensor<T>& pv = tape.val(pred);
            std::array<double, 5> raw{};
            for (int k = 0; k < 5; ++k) raw[static_cast<std::size_t>(k)] = static_cast<double>(pv.at2(0, k));
            acc.add_prediction(destandardize(m, pv, 0), raw, chunk.targets[t], loss_cfg, t_mean, t_std);
            acc.add_spike_stats(stats);
            sv = m.detach(tape, state);
            tape.reset();
        }
    }
    if (acc.counted() == 0) throw DataError("evaluate: every frame is masked");
    return acc.finish();
}

/// Per-frame predictions over a raw frame list: continuous state from a
/// single fresh start, eval mode. Returns de-standardized rows.
template <class T>
std::vector<std::array<double, 5>> predict_sequence(Model<T>& m, const std::vector<Frame>& frames, int width,
                                                    int height, bool binarize) {
    std::vector<std::array<double, 5>> out;
    out.reserve(frames.size());
    Tape<T> tape;
    tape.set_recording(false);
    ModelStateValues<T> sv = m.zero_state(1);
    SequenceChunk shim;
    for (const Frame& f : frames) {
        shim.frames.assign(1, f);
        std::vector<const SequenceChunk*> batch{&shim};
        ModelState<T> state = m.attach(tape, sv);
        Var<T> x = tape.constant(frames_to_tensor<T>(batch, 0, width, height, binarize));
        Var<T> pred = m.forward_step(tape, x, state, Mode::eval, 0, nullptr);
        out.push_back(destandardize(m, tape.val(pred), 0));
        sv = m.detach(tape, state);
        tape.reset();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct EpochLog {
    int epoch = 0;
    Metrics train;
    std::optional<Metrics> validation;
};

template <class T>
struct TrainResult {
    std::vector<EpochLog> epochs;
    std::uint64_t updates = 0;
    std::size_t tape_peak_nodes = 0;
};

template <class T>
class Trainer {
  public:
    Trainer(Model<T>& model, TrainConfig cfg) : m_(model), cfg_(std::move(cfg)), opt_(cfg_.lr, cfg_.momentum) {
        validate_train_config(cfg_);
        if (cfg_.method != TrainMethod::tbptt) {
            for (Param<T>* p : m_.params()) theta_bar_.push_back(p->value);
        }
    }

    /// Test hook: runs right after backward with the unregularized window
    /// gradients in place, before the optimizer touches anything.
    std::function<void(Model<T>&, std::uint64_t)> after_backward;
    /// Per-epoch hook for checkpoint selection.
    std::function<void(const EpochLog&, Model<T>&)> on_epoch;

    TrainResult<T> train(const std::vector<SequenceChunk>& train_chunks,
                         const std::vector<SequenceChunk>& val_chunks, int width, int height, bool binarize) {
        if (train_chunks.empty()) throw DataError("train: no training chunks");
        TrainResult<T> result;
        auto t_mean = standardization_mean(m_);
        auto t_std = standardization_std(m_);
        bool stop = false;
        for (int epoch = 1; epoch <= cfg_.epochs && !stop; ++epoch) {
            MetricsAccumulator acc;
            for (std::size_t b0 = 0; b0 < train_chunks.size() && !stop; b0 += static_cast<std::size_t>(cfg_.batch)) {
                std::vector<const SequenceChunk*> batch;
                for (std::size_t i = b0; i < std::min(train_chunks.size(), b0 + static_cast<std::size_t>(cfg_.batch)); ++i)
                    batch.push_back(&train_chunks[i]);
                stop = train_batch(batch, width, height, binarize, acc, t_mean, t_std, result);
            }
            if (acc.counted() == 0) throw DataError("train: no unmasked frames in epoch " + std::to_string(epoch));
            EpochLog log;
            log.epoch = epoch;
            log.train = acc.finish();
            if (!val_chunks.empty()) log.validation = evaluate(m_, val_chunks, width, height, binarize, cfg_.loss);
            if (on_epoch) on_epoch(log, m_);
            result.epochs.push_back(std::move(log));
        }
        result.tape_peak_nodes = tape_.peak_nodes();
        return result;
    }

  private:
    Model<T>& m_;
    TrainConfig cfg_;
    SgdMomentum<T> opt_;
    Tape<T> tape_;
    std::vector<Tensor<T>> theta_bar_;
    std::uint64_t forward_nonce_ = 0;

    // Returns true when the update cap is reached.
    bool train_batch(const std::vector<const SequenceChunk*>& batch, int width, int height, bool binarize,
                     MetricsAccumulator& acc, const std::array<double, 5>& t_mean,
                     const std::array<double, 5>& t_std, TrainResult<T>& result) {
        std::size_t len = batch.front()->frames.size();
        for (const auto* c : batch)
            if (c->frames.size() != len) throw DataError("train: chunks in a batch must share their length");
        int N = static_cast<int>(batch.size());
        std::size_t window = static_cast<std::size_t>(cfg_.bptt_steps);

        ModelStateValues<T> sv = m_.zero_state(N);
        for (std::size_t w0 = 0; w0 < len; w0 += window) {
            std::size_t w1 = std::min(len, w0 + window);
            tape_.reset();
            ModelState<T> state = m_.attach(tape_, sv);
            Var<T> loss_sum{};
            double weight_total = 0.0;
            for (std::size_t t = w0; t < w1; ++t) {
                Var<T> x = tape_.constant(frames_to_tensor<T>(batch, t, width, height, binarize));
                std::vector<SpikeStat> stats;
                Var<T> pred = m_.forward_step(tape_, x, state, Mode::train, forward_nonce_++, &stats);
                acc.add_spike_stats(stats);
                std::vector<const AlignedTarget*> targets;
                bool any_unmasked = false;
                for (const auto* c : batch) {
                    targets.push_back(&c->targets[t]);
                    any_unmasked = any_unmasked || !c->targets[t].masked;
                }
                const Tensor<T>& pv = tape_.val(pred);
                for (int n = 0; n < N; ++n) {
                    std::array<double, 5> raw{};
                    for (int k = 0; k < 5; ++k) raw[static_cast<std::size_t>(k)] = static_cast<double>(pv.at2(n, k));
                    acc.add_prediction(destandardize(m_, pv, n), raw, *targets[static_cast<std::size_t>(n)], cfg_.loss,
                                       t_mean, t_std);
                }
                if (any_unmasked) {
                    Var<T> term = frame_loss(tape_, pred, targets, m_.target_mean, m_.target_std, cfg_.loss, &weight_total);
                    loss_sum = loss_sum.valid() ? add(tape_, loss_sum, term) : term;
                }
            }
            if (weight_total > 0.0) {
                Var<T> loss = affine(tape_, loss_sum, T(1.0 / weight_total), T(0));
                double lv = static_cast<double>(tape_.val(loss).data[0]);
                if (!std::isfinite(lv)) throw NumericError("train: non-finite loss");
                for (Param<T>* p : m_.params()) p->zero_grad();
                tape_.backward(loss);
                if (after_backward) after_backward(m_, result.updates);
                if (cfg_.method == TrainMethod::tbptt) {
                    opt_.step(m_.params());
                } else {
                    fptt_update();
                }
                ++result.updates;
                if (cfg_.max_updates >= 0 && result.updates >= static_cast<std::uint64_t>(cfg_.max_updates)) {
                    sv = m_.detach(tape_, state);
                    tape_.reset();
                    return true;
                }
            }
            // Fully masked windows skip the update but still advance state.
            sv = m_.detach(tape_, state);
            tape_.reset();
        }
        return false;
    }

    void fptt_update() {
        const auto& params = m_.params();
        T alpha = static_cast<T>(cfg_.alpha);
        std::vector<Tensor<T>> raw_grads;
        raw_grads.reserve(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i];
            raw_grads.push_back(p.grad_or_zero());
            // Regularizer gradient alpha * (theta - theta_bar), added analytically.
            Tensor<T>& g = p.grad;
            for (std::size_t k = 0; k < g.data.size(); ++k)
                g.data[k] += alpha * (p.value.data[k] - theta_bar_[i].data[k]);
        }
        opt_.step(params);
        if (cfg_.fptt_bar_update) {
            T inv2a = T(1) / (T(2) * alpha);
            for (std::size_t i = 0; i < params.size(); ++i) {
                Tensor<T>& bar = theta_bar_[i];
                const Tensor<T>& v = params[i]->value;
                const Tensor<T>& g = raw_grads[i];
                for (std::size_t k = 0; k < bar.data.size(); ++k)
                    bar.data[k] = T(0.5) * (bar.data[k] + v.data[k]) - inv2a * g.data[k];
            }
        }
    }
};

/// Truncated BPTT: windowed backpropagation, plain SGD updates.
template <class T>
TrainResult<T> train_tbptt(Model<T>& m, const std::vector<SequenceChunk>& train_chunks,
                           const std::vector<SequenceChunk>& val_chunks, int width, int height, bool binarize,
                           TrainConfig cfg) {
    cfg.method = TrainMethod::tbptt;
    Trainer<T> trainer(m, cfg);
    return trainer.train(train_chunks, val_chunks, width, height, binarize);
}

/// FPTT (window length 1) or the hybrid with windowed BPTT (length T).
template <class T>
TrainResult<T> train_fptt(Model<T>& m, const std::vector<SequenceChunk>& train_chunks,
                          const std::vector<SequenceChunk>& val_chunks, int width, int height, bool binarize,
                          TrainConfig cfg) {
    if (cfg.method == TrainMethod::tbptt) cfg.method = TrainMethod::fptt;
    Trainer<T> trainer(m, cfg);
    return trainer.train(train_chunks, val_chunks, width, height, binarize);
}

}  // namespace evgaze
