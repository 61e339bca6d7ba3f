#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ocrfix/tensor.hpp"

namespace ocrfix::ad {

// Handle to a node on a Tape. Only meaningful for the tape that created it.
class Var {
public:
    Var() = default;
    std::size_t id() const { return id_; }
    bool valid() const { return id_ != kInvalid; }

private:
    friend class Tape;
    explicit Var(std::size_t id) : id_(id) {}
    static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
    std::size_t id_ = kInvalid;
};

// Append-only record of forward values and their pullbacks. Node ids are
// assigned in creation order, so reverse id order is a valid topological
// order for the backward sweep. A tape is single-threaded.
class Tape {
public:
    // Reads the gradient of `out` and accumulates into its inputs.
    using Pullback = std::function<void(Tape&, Var out)>;

    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    Var constant(Tensor value);
    Var variable(Tensor value);
    // Borrows `value` without copying; it must outlive the tape unchanged.
    Var parameter(const Tensor& value);

    const Tensor& value(Var v) const;
    // Zero-shaped tensor when no gradient reached `v`.
    Tensor grad(Var v) const;
    bool requires_grad(Var v) const { return node(v).requires_grad; }

    // Op plumbing: records `value` as the output of `inputs`; `pullback` is
    // kept only if recording and at least one input requires a gradient.
    Var push(Tensor value, std::initializer_list<Var> inputs, Pullback pullback);
    Var push(Tensor value, const std::vector<Var>& inputs, Pullback pullback);

    // Gradient buffer of `v`, zero-initialized on first use.
    Tensor& grad_buffer(Var v);
    const Tensor* grad_if_any(Var v) const;

    // True for constants, variables and parameters.
    bool is_leaf(Var v) const { return !node(v).pullback; }
    // Schedules grad(w) += value(a)^T grad(out) for the end of the current
    // backward sweep. Repeated uses of one weight are then reduced by a
    // single large product instead of many thin ones.
    void defer_weight_grad(Var a, Var out, Var w);

    // Seeds d(loss)/d(loss) = 1 and runs every recorded pullback in reverse.
    // Throws ShapeError when `loss` is not a single element.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        const Tensor* borrowed = nullptr;
        Tensor grad;
        Pullback pullback;
        bool requires_grad = false;
    };

    const Node& node(Var v) const;
    Node& node(Var v);

    struct Deferred {
        std::size_t a, out, w;
    };
    void flush_deferred();

    std::vector<Node> nodes_;
    std::vector<Deferred> deferred_;
    bool recording_;
};

}  // namespace ocrfix::ad
