#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ocrfix/tape.hpp"

// Differentiable primitives. Each records its pullback on the tape; shape
// errors throw ShapeError naming the op and both shapes.
namespace ocrfix::ad {

// [M,K] x [K,N] -> [M,N]
Var matmul(Tape& t, Var a, Var b);
// Same-shape elementwise sum, or bias-row addition when b is [last dim of a].
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);

Var concat(Tape& t, const std::vector<Var>& parts, std::size_t axis);
Var slice(Tape& t, Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Tape& t, Var a, Shape shape);

// table [V,E], ids in [0,V) -> [ids.size(), E]
Var embedding_lookup(Tape& t, Var table, std::span<const int> ids);

Var sigmoid(Tape& t, Var a);
Var tanh(Tape& t, Var a);

// Softmax over the last axis. -inf entries receive exactly zero mass.
Var row_softmax(Tape& t, Var a);

// Time-major convolution with kernel size 3 and zero padding, so output
// length equals input length. x: [T,C] or [T,B,C]; w: [3,C,C_out]; bias: [C_out].
// out[t] = x[t-1] w[0] + x[t] w[1] + x[t+1] w[2] + bias.
Var conv1d_same(Tape& t, Var x, Var w, Var bias);

// Splits the last axis in halves [A;B] and returns A * sigmoid(B).
Var glu(Tape& t, Var x);

// Mean over rows with target >= 0 of weight[i] * -log softmax(logits[i])[target[i]].
// Rows with a negative target are ignored. Empty weights mean all ones.
Var cross_entropy(Tape& t, Var logits, std::span<const int> targets,
                  std::span<const double> weights = {});

Var sum(Tape& t, Var a);

// keys [T,B,H], query [B,H] -> scores [B,T]
Var attention_scores(Tape& t, Var keys, Var query);
// weights [B,T], values [T,B,D] -> context [B,D]
Var attention_context(Tape& t, Var weights, Var values);

}  // namespace ocrfix::ad
