// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "evgaze/errors.hpp"
#include "evgaze/tensor.hpp"

namespace evgaze {

template <class T>
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// A named trainable tensor. Lives outside the tape so it survives window
/// resets; gradients accumulate here during backward.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;  // empty means zero

    void zero_grad() { grad = Tensor<T>(); }
    const Tensor<T>& grad_or_zero() {
        if (grad.data.empty()) grad = Tensor<T>::zeros(value.shape);
        return grad;
    }
};

/// Append-only reverse-mode differentiation record. Node ids are topologically
/// ordered by construction, so one reverse sweep visits each node exactly
/// once. reset() drops all nodes (the detach point between training windows);
/// peak_nodes() reports the high-water mark the FPTT memory law is stated in.
template <class T>
class Tape {
  public:
    // back(tape, upstream_grad, self_id)
    using BackFn = std::function<void(Tape&, const Tensor<T>&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // lazily allocated during backward
        bool needs_grad = false;
        BackFn back;
    };

    bool recording() const { return recording_; }
    void set_recording(bool r) { recording_ = r; }

    Var<T> push(Tensor<T> value, BackFn back, bool needs_grad) {
        Node n;
        n.value = std::move(value);
        if (recording_) {
            n.back = std::move(back);
            n.needs_grad = needs_grad;
        }
        nodes_.push_back(std::move(n));
        if (nodes_.size() > peak_) peak_ = nodes_.size();
        return {static_cast<int>(nodes_.size()) - 1};
    }

    Var<T> constant(Tensor<T> v) { return push(std::move(v), nullptr, false); }

    Var<T> leaf(Tensor<T> v, bool needs_grad) { return push(std::move(v), nullptr, needs_grad); }

    /// Bind a parameter once per recording window; repeated use returns the
    /// same node so weight sharing across time steps is automatic.
    Var<T> use(Param<T>& p) {
        auto it = param_bind_.find(&p);
        if (it != param_bind_.end()) return {it->second};
        Param<T>* pp = &p;
        Var<T> v = push(
            Tensor<T>(p.value),
            [pp](Tape&, const Tensor<T>& g, int) { accumulate(pp->grad, g); }, true);
        param_bind_[&p] = v.id;
        return v;
    }

    /// Same values, no backward connectivity.
    Var<T> detach(Var<T> v) { return constant(Tensor<T>(val(v))); }

    const Tensor<T>& val(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Tensor<T>& grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    bool needs_grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

    /// Gradient of v, materialized as zeros if backward never reached it.
    Tensor<T> grad_or_zero(Var<T> v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        return n.grad.data.empty() ? Tensor<T>::zeros(n.value.shape) : n.grad;
    }

    void accum(int id, const Tensor<T>& g) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad) return;
        if (n.grad.data.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) n.grad.data[i] += g.data[i];
    }

    void backward(Var<T> loss) {
        if (!recording_) throw ConfigError("backward: tape is not recording");
        if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size()))
            throw ConfigError("backward: loss is not on this tape");
        Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
        if (ln.value.numel() != 1) throw ConfigError("backward: loss must be a scalar");
        if (!ln.needs_grad) return;
        if (ln.grad.data.empty()) ln.grad = Tensor<T>::zeros(ln.value.shape);
        for (auto& x : ln.grad.data) x += T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.needs_grad || n.grad.data.empty() || !n.back) continue;
            n.back(*this, n.grad, i);
        }
    }

    void reset() {
        nodes_.clear();
        param_bind_.clear();
    }

    std::size_t size() const { return nodes_.size(); }
    std::size_t peak_nodes() const { return peak_; }
    void reset_peak() { peak_ = nodes_.size(); }

  private:
    std::vector<Node> nodes_;
    std::unordered_map<const void*, int> param_bind_;
    bool recording_ = true;
    std::size_t peak_ = 0;
};

}  // namespace evgaze
