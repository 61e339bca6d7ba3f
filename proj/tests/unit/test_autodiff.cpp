#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ocrfix/ops.hpp"
#include "oracles.hpp"

using namespace ocrfix::ad;
using oracle::random_tensor;

namespace {

constexpr double kTol = 1e-4;

// Reduces any tensor to a scalar with fixed random weights so every output
// entry contributes a distinct gradient.
Var project(Tape& t, Var x, std::uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    const auto& v = t.value(x);
    const Var w = t.constant(random_tensor(v.shape(), rng));
    return sum(t, mul(t, x, w));
}

double check(std::vector<Tensor> inputs, const std::function<Var(Tape&, const std::vector<Var>&)>& f) {
    return oracle::check_gradients(std::move(inputs), f).max_rel_error;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 1.5);
    CHECK(t.reshaped({3, 2}).dim(0) == 3);
    CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
    CHECK_THROWS(Tensor({2, 2}, std::vector<double>{1.0}));
    CHECK(shape_str({2, 3}) == "[2,3]");
}

TEST_CASE("forward examples") {
    Tape t;
    const Var u = t.constant(Tensor({2, 4}, 0.3));
    const auto& s = t.value(row_softmax(t, u));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(0.25));

    const Var ab = t.constant(Tensor({1, 4}, {2.0, -4.0, 0.0, 0.0}));
    const auto& g = t.value(glu(t, ab));
    CHECK(g[0] == 1.0);
    CHECK(g[1] == -2.0);

    std::mt19937_64 rng(1);
    const Var x = t.constant(random_tensor({5, 3}, rng));
    Tensor w({3, 3, 3}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) w[(1 * 3 + c) * 3 + c] = 1.0;
    const Var y = conv1d_same(t, x, t.constant(w), t.constant(Tensor({3}, 0.0)));
    CHECK(t.value(y) == t.value(x));
}

TEST_CASE("softmax rows sum to one and masked entries get zero mass") {
    std::mt19937_64 rng(4);
    Tape t;
    auto x = random_tensor({6, 9}, rng, 40.0);
    x[3] = -std::numeric_limits<double>::infinity();
    const auto& s = t.value(row_softmax(t, t.constant(x)));
    CHECK(s[3] == 0.0);
    for (std::size_t r = 0; r < 6; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 9; ++c) total += s[r * 9 + c];
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward examples") {
    Tape t;
    const Var x = t.variable(Tensor({2, 3}, 0.7));
    t.backward(sum(t, x));
    const Tensor g = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 1.0);

    Tape t2;
    const Var z = t2.variable(Tensor({1}, 0.0));
    t2.backward(sum(t2, mul(t2, z, sigmoid(t2, z))));
    CHECK(t2.grad(z)[0] == doctest::Approx(0.5));

    Tape t3;
    const Var v = t3.variable(Tensor({2}, 1.0));
    CHECK_THROWS_AS(t3.backward(v), ShapeError);
}

TEST_CASE("unreachable parameters get zero gradient") {
    const Tensor p({2, 2}, 1.0);
    Tape t;
    const Var used = t.variable(Tensor({2}, 1.0));
    const Var unused = t.parameter(p);
    t.backward(sum(t, used));
    const Tensor g = t.grad(unused);
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("shape errors name the op and both shapes") {
    Tape t;
    const Var a = t.constant(Tensor({2, 3}));
    const Var b = t.constant(Tensor({4, 5}));
    try {
        matmul(t, a, b);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
    CHECK_THROWS_AS(add(t, a, b), ShapeError);
    CHECK_THROWS_AS(glu(t, t.constant(Tensor({2, 3}))), ShapeError);
    CHECK_THROWS_AS(conv1d_same(t, a, t.constant(Tensor({2, 3, 4})), t.constant(Tensor({4}))), ShapeError);
}

TEST_CASE("gradient checks for every primitive") {
    std::mt19937_64 rng(7);
    auto r = [&](Shape s, double scale = 1.0) { return random_tensor(std::move(s), rng, scale); };

    SUBCASE("matmul") {
        CHECK(check({r({3, 4}), r({4, 5})}, [](Tape& t, const auto& v) { return project(t, matmul(t, v[0], v[1])); }) < kTol);
        // same weight used twice exercises the deferred weight gradient
        CHECK(check({r({3, 4}), r({4, 4})}, [](Tape& t, const auto& v) {
                  return project(t, matmul(t, tanh(t, matmul(t, v[0], v[1])), v[1]));
              }) < kTol);
    }
    SUBCASE("add sub mul scale") {
        CHECK(check({r({3, 4}), r({3, 4})}, [](Tape& t, const auto& v) { return project(t, add(t, v[0], v[1])); }) < kTol);
        CHECK(check({r({3, 4}), r({4})}, [](Tape& t, const auto& v) { return project(t, add(t, v[0], v[1])); }) < kTol);
        CHECK(check({r({3, 4}), r({3, 4})}, [](Tape& t, const auto& v) { return project(t, sub(t, v[0], v[1])); }) < kTol);
        CHECK(check({r({3, 4}), r({3, 4})}, [](Tape& t, const auto& v) { return project(t, mul(t, v[0], v[1])); }) < kTol);
        CHECK(check({r({3, 4})}, [](Tape& t, const auto& v) { return project(t, scale(t, v[0], -1.7)); }) < kTol);
    }
    SUBCASE("concat slice reshape") {
        CHECK(check({r({2, 3}), r({2, 4})}, [](Tape& t, const auto& v) { return project(t, concat(t, {v[0], v[1]}, 1)); }) < kTol);
        CHECK(check({r({2, 3}), r({1, 3})}, [](Tape& t, const auto& v) { return project(t, concat(t, {v[0], v[1]}, 0)); }) < kTol);
        CHECK(check({r({3, 2, 5})}, [](Tape& t, const auto& v) { return project(t, slice(t, v[0], 2, 1, 4)); }) < kTol);
        CHECK(check({r({3, 2, 5})}, [](Tape& t, const auto& v) { return project(t, slice(t, v[0], 0, 1, 3)); }) < kTol);
        CHECK(check({r({3, 4})}, [](Tape& t, const auto& v) { return project(t, reshape(t, v[0], {2, 6})); }) < kTol);
    }
    SUBCASE("embedding lookup") {
        const std::vector<int> ids{2, 0, 2, 4};
        CHECK(check({r({5, 3})}, [&](Tape& t, const auto& v) { return project(t, embedding_lookup(t, v[0], ids)); }) < kTol);
    }
    SUBCASE("sigmoid tanh") {
        CHECK(check({r({3, 4}, 3.0)}, [](Tape& t, const auto& v) { return project(t, sigmoid(t, v[0])); }) < kTol);
        CHECK(check({r({3, 4}, 3.0)}, [](Tape& t, const auto& v) { return project(t, tanh(t, v[0])); }) < kTol);
    }
    SUBCASE("row softmax") {
        CHECK(check({r({4, 6}, 3.0)}, [](Tape& t, const auto& v) { return project(t, row_softmax(t, v[0])); }) < kTol);
        CHECK(check({r({4, 6}, 3.0)}, [](Tape& t, const auto& v) {
                  Tensor mask({4, 6}, 0.0);
                  mask[2] = mask[9] = -std::numeric_limits<double>::infinity();
                  return project(t, row_softmax(t, add(t, v[0], t.constant(mask))));
              }) < kTol);
    }
    SUBCASE("conv1d same") {
        CHECK(check({r({6, 3}), r({3, 3, 4}), r({4})}, [](Tape& t, const auto& v) {
                  return project(t, conv1d_same(t, v[0], v[1], v[2]));
              }) < kTol);
        CHECK(check({r({5, 2, 3}), r({3, 3, 4}), r({4})}, [](Tape& t, const auto& v) {
                  return project(t, conv1d_same(t, v[0], v[1], v[2]));
              }) < kTol);
    }
    SUBCASE("glu") {
        CHECK(check({r({4, 6}, 2.0)}, [](Tape& t, const auto& v) { return project(t, glu(t, v[0])); }) < kTol);
    }
    SUBCASE("cross entropy") {
        const std::vector<int> targets{1, -1, 4, 0, 2};
        const std::vector<double> weights{0.7, 1.0, 1.0, 0.7, 1.0};
        CHECK(check({r({5, 5}, 2.0)}, [&](Tape& t, const auto& v) { return cross_entropy(t, v[0], targets); }) < kTol);
        CHECK(check({r({5, 5}, 2.0)}, [&](Tape& t, const auto& v) { return cross_entropy(t, v[0], targets, weights); }) < kTol);
    }
    SUBCASE("attention scores and context") {
        CHECK(check({r({4, 2, 3}), r({2, 3})}, [](Tape& t, const auto& v) {
                  return project(t, attention_scores(t, v[0], v[1]));
              }) < kTol);
        CHECK(check({r({2, 4}), r({4, 2, 5})}, [](Tape& t, const auto& v) {
                  return project(t, attention_context(t, row_softmax(t, v[0]), v[1]));
              }) < kTol);
    }
}

TEST_CASE("cross entropy ignores negative targets and averages the rest") {
    Tape t;
    const Var logits = t.constant(Tensor({2, 2}, {0.0, 0.0, 5.0, 1.0}));
    const std::vector<int> targets{0, -1};
    CHECK(t.value(cross_entropy(t, logits, targets))[0] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("forward values are deterministic") {
    auto run = [] {
        std::mt19937_64 rng(12);
        Tape t;
        const Var x = t.constant(random_tensor({7, 2, 6}, rng));
        const Var w = t.constant(random_tensor({3, 6, 8}, rng));
        const Var b = t.constant(random_tensor({8}, rng));
        return t.value(glu(t, conv1d_same(t, x, w, b)));
    };
    CHECK(run() == run());
}
