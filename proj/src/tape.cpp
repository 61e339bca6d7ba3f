#include "ocrfix/tape.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "ocrfix/kernels.hpp"

namespace ocrfix::ad {

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.id() >= nodes_.size()) throw std::out_of_range("Var does not belong to this tape");
    return nodes_[v.id()];
}

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || v.id() >= nodes_.size()) throw std::out_of_range("Var does not belong to this tape");
    return nodes_[v.id()];
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, {}, false});
    return Var(nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
    nodes_.push_back(Node{std::move(value), nullptr, {}, {}, recording_});
    return Var(nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& value) {
    nodes_.push_back(Node{{}, &value, {}, {}, recording_});
    return Var(nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
    const auto& n = node(v);
    return n.borrowed ? *n.borrowed : n.value;
}

Tensor Tape::grad(Var v) const {
    const auto& n = node(v);
    if (!n.grad.empty()) return n.grad;
    return Tensor(value(v).shape(), 0.0);
}

const Tensor* Tape::grad_if_any(Var v) const {
    const auto& n = node(v);
    return n.grad.empty() ? nullptr : &n.grad;
}

Tensor& Tape::grad_buffer(Var v) {
    auto& n = node(v);
    if (n.grad.empty()) n.grad = Tensor((n.borrowed ? *n.borrowed : n.value).shape(), 0.0);
    return n.grad;
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, Pullback pullback) {
    bool needs = false;
    if (recording_)
        for (auto in : inputs) needs = needs || node(in).requires_grad;
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(pullback) : Pullback{}, needs});
    return Var(nodes_.size() - 1);
}

Var Tape::push(Tensor value, const std::vector<Var>& inputs, Pullback pullback) {
    bool needs = false;
    if (recording_)
        for (auto in : inputs) needs = needs || node(in).requires_grad;
    nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(pullback) : Pullback{}, needs});
    return Var(nodes_.size() - 1);
}

void Tape::backward(Var loss) {
    const auto& lv = value(loss);
    if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
    if (!recording_) throw std::logic_error("backward on a tape that is not recording");
    grad_buffer(loss)[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.pullback || n.grad.empty()) continue;
        n.pullback(*this, Var(i));
    }
    flush_deferred();
}

void Tape::defer_weight_grad(Var a, Var out, Var w) {
    node(a);
    node(out);
    node(w);
    deferred_.push_back({a.id(), out.id(), w.id()});
}

void Tape::flush_deferred() {
    std::map<std::size_t, std::vector<const Deferred*>> by_weight;
    for (const auto& d : deferred_) by_weight[d.w].push_back(&d);
    for (const auto& [w, items] : by_weight) {
        const std::size_t k = value(Var(items.front()->a)).shape().back();
        const std::size_t n = value(Var(w)).shape().back();
        std::size_t rows = 0;
        for (const auto* d : items) rows += value(Var(d->a)).size() / k;
        std::vector<double> a_rows(rows * k), g_rows(rows * n);
        std::size_t r = 0;
        for (const auto* d : items) {
            const auto& av = value(Var(d->a));
            const auto& g = nodes_[d->out].grad;
            const std::size_t m = av.size() / k;
            std::copy(av.raw(), av.raw() + m * k, a_rows.data() + r * k);
            std::copy(g.raw(), g.raw() + m * n, g_rows.data() + r * n);
            r += m;
        }
        kernels::gemm_tn(a_rows.data(), g_rows.data(), grad_buffer(Var(w)).raw(), k, rows, n, true);
    }
    deferred_.clear();
}

}  // namespace ocrfix::ad
