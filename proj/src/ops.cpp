#include "ocrfix/ops.hpp"

#include <cmath>
#include <limits>

#include "ocrfix/kernels.hpp"

namespace ocrfix::ad {

namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void accumulate(Tensor& dst, const Tensor& src) { kernels::axpy(1.0, src.raw(), dst.raw(), dst.size()); }

// (outer, axis, inner) view of a shape around `axis`.
struct AxisView {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
    v.len = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) mismatch("matmul", av.shape(), bv.shape());
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    kernels::gemm_nn(av.raw(), bv.raw(), out.raw(), m, k, n, false);
    return t.push(std::move(out), {a, b}, [a, b, m, k, n](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(a))
            kernels::gemm_nt(g.raw(), tp.value(b).raw(), tp.grad_buffer(a).raw(), m, n, k, true);
        if (tp.requires_grad(b)) {
            if (tp.is_leaf(b)) {
                tp.defer_weight_grad(a, o, b);
            } else {
                kernels::gemm_tn(tp.value(a).raw(), g.raw(), tp.grad_buffer(b).raw(), k, m, n, true);
            }
        }
    });
}

Var add(Tape& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.shape() == bv.shape()) {
        Tensor out = av;
        kernels::axpy(1.0, bv.raw(), out.raw(), out.size());
        return t.push(std::move(out), {a, b}, [a, b](Tape& tp, Var o) {
            const Tensor& g = *tp.grad_if_any(o);
            if (tp.requires_grad(a)) accumulate(tp.grad_buffer(a), g);
            if (tp.requires_grad(b)) accumulate(tp.grad_buffer(b), g);
        });
    }
    if (bv.rank() != 1 || bv.dim(0) != av.shape().back()) mismatch("add", av.shape(), bv.shape());
    const std::size_t cols = bv.dim(0);
    const std::size_t rows = av.size() / cols;
    Tensor out = av;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] += bv[j];
    return t.push(std::move(out), {a, b}, [a, b, rows, cols](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(a)) accumulate(tp.grad_buffer(a), g);
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_buffer(b);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < cols; ++j) gb[j] += g[r * cols + j];
        }
    });
}

Var sub(Tape& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.shape() != bv.shape()) mismatch("sub", av.shape(), bv.shape());
    Tensor out = av;
    kernels::axpy(-1.0, bv.raw(), out.raw(), out.size());
    return t.push(std::move(out), {a, b}, [a, b](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(a)) accumulate(tp.grad_buffer(a), g);
        if (tp.requires_grad(b)) kernels::axpy(-1.0, g.raw(), tp.grad_buffer(b).raw(), g.size());
    });
}

Var mul(Tape& t, Var a, Var b) {
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    if (av.shape() != bv.shape()) mismatch("mul", av.shape(), bv.shape());
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return t.push(std::move(out), {a, b}, [a, b](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(a)) {
            const auto& bv2 = tp.value(b);
            Tensor& ga = tp.grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        }
        if (tp.requires_grad(b)) {
            const auto& av2 = tp.value(a);
            Tensor& gb = tp.grad_buffer(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
        }
    });
}

Var scale(Tape& t, Var a, double s) {
    Tensor out = t.value(a);
    for (auto& x : out.data()) x *= s;
    return t.push(std::move(out), {a}, [a, s](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        kernels::axpy(s, g.raw(), tp.grad_buffer(a).raw(), g.size());
    });
}

Var concat(Tape& t, const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape first = t.value(parts[0]).shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> lens;
    for (auto p : parts) {
        const auto& s = t.value(p).shape();
        if (s.size() != first.size()) mismatch("concat", first, s);
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != first[d]) mismatch("concat", first, s);
        out_shape[axis] += s[axis];
        lens.push_back(s[axis]);
    }
    const auto view = axis_view(out_shape, axis);
    Tensor out(out_shape);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& src = t.value(parts[k]);
        const std::size_t chunk = lens[k] * view.inner;
        for (std::size_t o = 0; o < view.outer; ++o) {
            const double* s = src.raw() + o * chunk;
            double* d = out.raw() + o * view.len * view.inner + offset * view.inner;
            std::copy(s, s + chunk, d);
        }
        offset += lens[k];
    }
    return t.push(std::move(out), parts, [parts, lens, view](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        std::size_t off = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const std::size_t chunk = lens[k] * view.inner;
            if (tp.requires_grad(parts[k])) {
                Tensor& gp = tp.grad_buffer(parts[k]);
                for (std::size_t oo = 0; oo < view.outer; ++oo) {
                    const double* s = g.raw() + oo * view.len * view.inner + off * view.inner;
                    double* d = gp.raw() + oo * chunk;
                    for (std::size_t i = 0; i < chunk; ++i) d[i] += s[i];
                }
            }
            off += lens[k];
        }
    });
}

Var slice(Tape& t, Var a, std::size_t axis, std::size_t begin, std::size_t end) {
    const auto& av = t.value(a);
    if (axis >= av.rank() || begin >= end || end > av.dim(axis))
        throw ShapeError("slice: [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(av.shape()));
    const auto view = axis_view(av.shape(), axis);
    Shape out_shape = av.shape();
    out_shape[axis] = end - begin;
    Tensor out(out_shape);
    const std::size_t chunk = (end - begin) * view.inner;
    for (std::size_t o = 0; o < view.outer; ++o) {
        const double* s = av.raw() + o * view.len * view.inner + begin * view.inner;
        std::copy(s, s + chunk, out.raw() + o * chunk);
    }
    return t.push(std::move(out), {a}, [a, view, begin, chunk](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t oo = 0; oo < view.outer; ++oo) {
            double* d = ga.raw() + oo * view.len * view.inner + begin * view.inner;
            const double* s = g.raw() + oo * chunk;
            for (std::size_t i = 0; i < chunk; ++i) d[i] += s[i];
        }
    });
}

Var reshape(Tape& t, Var a, Shape shape) {
    Tensor out = t.value(a).reshaped(std::move(shape));
    return t.push(std::move(out), {a}, [a](Tape& tp, Var o) {
        accumulate(tp.grad_buffer(a), *tp.grad_if_any(o));
    });
}

Var embedding_lookup(Tape& t, Var table, std::span<const int> ids) {
    const auto& tv = t.value(table);
    if (tv.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2, got " + shape_str(tv.shape()));
    if (ids.empty()) throw ShapeError("embedding_lookup: no ids");
    const std::size_t vocab = tv.dim(0), e = tv.dim(1);
    std::vector<int> idv(ids.begin(), ids.end());
    Tensor out({idv.size(), e});
    for (std::size_t r = 0; r < idv.size(); ++r) {
        if (idv[r] < 0 || static_cast<std::size_t>(idv[r]) >= vocab)
            throw ShapeError("embedding_lookup: id " + std::to_string(idv[r]) + " outside table " + shape_str(tv.shape()));
        std::copy(tv.raw() + idv[r] * e, tv.raw() + (idv[r] + 1) * e, out.raw() + r * e);
    }
    return t.push(std::move(out), {table}, [table, idv, e](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        Tensor& gt = tp.grad_buffer(table);
        for (std::size_t r = 0; r < idv.size(); ++r)
            for (std::size_t j = 0; j < e; ++j) gt[static_cast<std::size_t>(idv[r]) * e + j] += g[r * e + j];
    });
}

Var sigmoid(Tape& t, Var a) {
    const auto& av = t.value(a);
    Tensor out(av.shape());
    kernels::sigmoid(av.raw(), out.raw(), av.size());
    return t.push(std::move(out), {a}, [a](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        const Tensor& y = tp.value(o);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var tanh(Tape& t, Var a) {
    const auto& av = t.value(a);
    Tensor out(av.shape());
    kernels::tanh(av.raw(), out.raw(), av.size());
    return t.push(std::move(out), {a}, [a](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        const Tensor& y = tp.value(o);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var row_softmax(Tape& t, Var a) {
    const auto& av = t.value(a);
    const std::size_t cols = av.shape().back();
    const std::size_t rows = av.size() / cols;
    Tensor out(av.shape());
    kernels::row_softmax(av.raw(), out.raw(), rows, cols);
    return t.push(std::move(out), {a}, [a, rows, cols](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        const Tensor& y = tp.value(o);
        Tensor& ga = tp.grad_buffer(a);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += g[r * cols + j] * y[r * cols + j];
            for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += y[r * cols + j] * (g[r * cols + j] - dot);
        }
    });
}

Var conv1d_same(Tape& t, Var x, Var w, Var bias) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    const auto& bv = t.value(bias);
    if (xv.rank() != 2 && xv.rank() != 3) throw ShapeError("conv1d_same: input must be [T,C] or [T,B,C], got " + shape_str(xv.shape()));
    const std::size_t steps = xv.dim(0);
    const std::size_t cin = xv.shape().back();
    const std::size_t batch = xv.rank() == 3 ? xv.dim(1) : 1;
    if (wv.rank() != 3 || wv.dim(0) != 3 || wv.dim(1) != cin) mismatch("conv1d_same", xv.shape(), wv.shape());
    const std::size_t cout = wv.dim(2);
    if (bv.rank() != 1 || bv.dim(0) != cout) mismatch("conv1d_same", wv.shape(), bv.shape());

    Shape out_shape = xv.shape();
    out_shape.back() = cout;
    Tensor out(out_shape);
    const std::size_t rows = steps * batch;
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv.raw(), bv.raw() + cout, out.raw() + r * cout);
    const std::size_t tap = cin * cout;
    const std::size_t shifted = rows - batch;  // rows with a neighbour on the given side
    kernels::gemm_nn(xv.raw(), wv.raw() + tap, out.raw(), rows, cin, cout, true);
    if (shifted > 0) {
        // out[t] += x[t-1] w0
        kernels::gemm_nn(xv.raw(), wv.raw(), out.raw() + batch * cout, shifted, cin, cout, true);
        // out[t] += x[t+1] w2
        kernels::gemm_nn(xv.raw() + batch * cin, wv.raw() + 2 * tap, out.raw(), shifted, cin, cout, true);
    }
    return t.push(std::move(out), {x, w, bias}, [x, w, bias, rows, batch, shifted, cin, cout, tap](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(bias)) {
            Tensor& gb = tp.grad_buffer(bias);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < cout; ++j) gb[j] += g[r * cout + j];
        }
        if (tp.requires_grad(x)) {
            const double* wr = tp.value(w).raw();
            double* gx = tp.grad_buffer(x).raw();
            kernels::gemm_nt(g.raw(), wr + tap, gx, rows, cout, cin, true);
            if (shifted > 0) {
                kernels::gemm_nt(g.raw() + batch * cout, wr, gx, shifted, cout, cin, true);
                kernels::gemm_nt(g.raw(), wr + 2 * tap, gx + batch * cin, shifted, cout, cin, true);
            }
        }
        if (tp.requires_grad(w)) {
            const double* xr = tp.value(x).raw();
            double* gw = tp.grad_buffer(w).raw();
            kernels::gemm_tn(xr, g.raw(), gw + tap, cin, rows, cout, true);
            if (shifted > 0) {
                kernels::gemm_tn(xr, g.raw() + batch * cout, gw, cin, shifted, cout, true);
                kernels::gemm_tn(xr + batch * cin, g.raw(), gw + 2 * tap, cin, shifted, cout, true);
            }
        }
    });
}

Var glu(Tape& t, Var x) {
    const auto& xv = t.value(x);
    const std::size_t width = xv.shape().back();
    if (width % 2 != 0) throw ShapeError("glu: last axis must be even, got " + shape_str(xv.shape()));
    const std::size_t half = width / 2;
    const std::size_t rows = xv.size() / width;
    Shape out_shape = xv.shape();
    out_shape.back() = half;
    Tensor out(out_shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < half; ++j) {
            const double av = xv[r * width + j];
            const double bv = xv[r * width + half + j];
            out[r * half + j] = av / (1.0 + std::exp(-bv));
        }
    return t.push(std::move(out), {x}, [x, rows, half, width](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        const Tensor& xv2 = tp.value(x);
        Tensor& gx = tp.grad_buffer(x);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < half; ++j) {
                const double av = xv2[r * width + j];
                const double s = 1.0 / (1.0 + std::exp(-xv2[r * width + half + j]));
                const double gr = g[r * half + j];
                gx[r * width + j] += gr * s;
                gx[r * width + half + j] += gr * av * s * (1.0 - s);
            }
    });
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> targets, std::span<const double> weights) {
    const auto& lv = t.value(logits);
    if (lv.rank() != 2 || lv.dim(0) != targets.size())
        throw ShapeError("cross_entropy: logits " + shape_str(lv.shape()) + " vs " + std::to_string(targets.size()) +
                         " targets");
    if (!weights.empty() && weights.size() != targets.size())
        throw ShapeError("cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(targets.size()) + " targets");
    const std::size_t rows = lv.dim(0), vocab = lv.dim(1);
    Tensor probs(lv.shape());
    kernels::row_softmax(lv.raw(), probs.raw(), rows, vocab);
    std::vector<int> tg(targets.begin(), targets.end());
    std::vector<double> wt(rows, 1.0);
    if (!weights.empty()) wt.assign(weights.begin(), weights.end());
    std::size_t active = 0;
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (tg[r] < 0) continue;
        if (static_cast<std::size_t>(tg[r]) >= vocab)
            throw ShapeError("cross_entropy: target " + std::to_string(tg[r]) + " outside vocab of " + std::to_string(vocab));
        ++active;
        const double* lr = lv.raw() + r * vocab;
        double mx = lr[0];
        for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, lr[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) z += std::exp(lr[j] - mx);
        const double nll = (std::log(z) + mx) - lr[tg[r]];
        total += wt[r] * nll;
    }
    const double denom = active == 0 ? 1.0 : static_cast<double>(active);
    Tensor out = Tensor::scalar(total / denom);
    return t.push(std::move(out), {logits},
                  [logits, probs = std::move(probs), tg = std::move(tg), wt = std::move(wt), denom, vocab](Tape& tp, Var o) {
                      const double g = (*tp.grad_if_any(o))[0];
                      Tensor& gl = tp.grad_buffer(logits);
                      for (std::size_t r = 0; r < tg.size(); ++r) {
                          if (tg[r] < 0) continue;
                          const double c = g * wt[r] / denom;
                          for (std::size_t j = 0; j < vocab; ++j) gl[r * vocab + j] += c * probs[r * vocab + j];
                          gl[r * vocab + static_cast<std::size_t>(tg[r])] -= c;
                      }
                  });
}

Var sum(Tape& t, Var a) {
    const auto& av = t.value(a);
    double s = 0.0;
    for (double x : av.data()) s += x;
    return t.push(Tensor::scalar(s), {a}, [a](Tape& tp, Var o) {
        const double g = (*tp.grad_if_any(o))[0];
        for (auto& x : tp.grad_buffer(a).data()) x += g;
    });
}

Var attention_scores(Tape& t, Var keys, Var query) {
    const auto& kv = t.value(keys);
    const auto& qv = t.value(query);
    if (kv.rank() != 3 || qv.rank() != 2 || kv.dim(1) != qv.dim(0) || kv.dim(2) != qv.dim(1))
        mismatch("attention_scores", kv.shape(), qv.shape());
    const std::size_t steps = kv.dim(0), batch = kv.dim(1), h = kv.dim(2);
    Tensor out({batch, steps});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* q = qv.raw() + b * h;
        for (std::size_t s = 0; s < steps; ++s) {
            const double* k = kv.raw() + (s * batch + b) * h;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t j = 0; j < h; ++j) acc += k[j] * q[j];
            out[b * steps + s] = acc;
        }
    }
    return t.push(std::move(out), {keys, query}, [keys, query, steps, batch, h](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(keys)) {
            const auto& q = tp.value(query);
            Tensor& gk = tp.grad_buffer(keys);
            for (std::size_t s = 0; s < steps; ++s)
                for (std::size_t b = 0; b < batch; ++b) {
                    const double gs = g[b * steps + s];
                    if (gs == 0.0) continue;
                    kernels::axpy(gs, q.raw() + b * h, gk.raw() + (s * batch + b) * h, h);
                }
        }
        if (tp.requires_grad(query)) {
            const auto& k = tp.value(keys);
            Tensor& gq = tp.grad_buffer(query);
            for (std::size_t s = 0; s < steps; ++s)
                for (std::size_t b = 0; b < batch; ++b) {
                    const double gs = g[b * steps + s];
                    if (gs == 0.0) continue;
                    kernels::axpy(gs, k.raw() + (s * batch + b) * h, gq.raw() + b * h, h);
                }
        }
    });
}

Var attention_context(Tape& t, Var weights, Var values) {
    const auto& av = t.value(weights);
    const auto& vv = t.value(values);
    if (av.rank() != 2 || vv.rank() != 3 || av.dim(0) != vv.dim(1) || av.dim(1) != vv.dim(0))
        mismatch("attention_context", av.shape(), vv.shape());
    const std::size_t batch = av.dim(0), steps = av.dim(1), d = vv.dim(2);
    Tensor out({batch, d});
    for (std::size_t s = 0; s < steps; ++s)
        for (std::size_t b = 0; b < batch; ++b) {
            const double a = av[b * steps + s];
            if (a == 0.0) continue;
            kernels::axpy(a, vv.raw() + (s * batch + b) * d, out.raw() + b * d, d);
        }
    return t.push(std::move(out), {weights, values}, [weights, values, batch, steps, d](Tape& tp, Var o) {
        const Tensor& g = *tp.grad_if_any(o);
        if (tp.requires_grad(weights)) {
            const auto& v = tp.value(values);
            Tensor& ga = tp.grad_buffer(weights);
            for (std::size_t s = 0; s < steps; ++s)
                for (std::size_t b = 0; b < batch; ++b) {
                    const double* vr = v.raw() + (s * batch + b) * d;
                    const double* gr = g.raw() + b * d;
                    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                    for (std::size_t j = 0; j < d; ++j) acc += vr[j] * gr[j];
                    ga[b * steps + s] += acc;
                }
        }
        if (tp.requires_grad(values)) {
            const auto& a = tp.value(weights);
            Tensor& gv = tp.grad_buffer(values);
            for (std::size_t s = 0; s < steps; ++s)
                for (std::size_t b = 0; b < batch; ++b) {
                    const double w = a[b * steps + s];
                    if (w == 0.0) continue;
                    kernels::axpy(w, g.raw() + b * d, gv.raw() + (s * batch + b) * d, d);
                }
        }
    });
}

}  // namespace ocrfix::ad
