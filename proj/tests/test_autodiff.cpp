#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "rdl/autodiff.hpp"
#include "rdl/errors.hpp"
#include "rdl/rng.hpp"

using namespace rdl;
using autodiff::Graph;
using autodiff::Parameter;
using autodiff::ParamPtr;
using manifold::ManifoldDescriptor;

namespace {

ParamPtr euclid_param(const std::string& name, Tensor value) {
    auto desc = ManifoldDescriptor::euclidean(value.shape());
    return std::make_shared<Parameter>(name, std::move(value), desc);
}

} // namespace

TEST_CASE("forward computes closed-form values") {
    Graph g;
    auto x = g.input("x", {2, 3});
    auto w = euclid_param("w", Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
    auto y = g.matmul(x, g.parameter(w));
    g.sum(y);
    g.forward({{"x", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})}});
    const Tensor& out = g.output(y);
    CHECK(out(0, 0) == doctest::Approx(58));
    CHECK(out(0, 1) == doctest::Approx(64));
    CHECK(out(1, 0) == doctest::Approx(139));
    CHECK(out(1, 1) == doctest::Approx(154));
}

TEST_CASE("relu clamps negatives only") {
    Graph g;
    auto x = g.input("x", {2});
    auto r = g.relu(x);
    g.sum(r);
    g.forward({{"x", Tensor({2}, {-1, 2})}});
    CHECK(g.output(r)[0] == 0.0);
    CHECK(g.output(r)[1] == 2.0);
}

TEST_CASE("uniform two-class logits lose ln 2") {
    Graph g;
    auto x = g.input("x", {1, 2});
    auto lp = g.log_softmax_rows(x);
    auto loss = g.nll_loss_mean(lp, {0});
    g.forward({{"x", Tensor({1, 2}, {0, 0})}});
    CHECK(g.output(loss)[0] == doctest::Approx(0.6931471805599453).epsilon(1e-14));
}

TEST_CASE("log_softmax is stable for extreme logits") {
    Graph g;
    auto x = g.input("x", {1, 2});
    auto lp = g.log_softmax_rows(x);
    g.sum(lp);
    g.forward({{"x", Tensor({1, 2}, {1000.0, 0.0})}});
    CHECK(std::isfinite(g.output(lp)[0]));
    CHECK(std::isfinite(g.output(lp)[1]));
    CHECK(g.output(lp)[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g.output(lp)[1] == doctest::Approx(-1000.0));
}

TEST_CASE("backward of a plain sum is all ones") {
    Graph g;
    auto w = euclid_param("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    g.sum(g.parameter(w));
    g.forward({});
    g.backward();
    REQUIRE(w->egrad.has_value());
    CHECK(max_abs_diff(*w->egrad, Tensor::full({2, 3}, 1.0)) == 0.0);
}

TEST_CASE("relu subgradient at zero is zero") {
    Graph g;
    auto w = euclid_param("w", Tensor({3}, {-1, 2, 0}));
    g.sum(g.relu(g.parameter(w)));
    g.forward({});
    g.backward();
    const Tensor& e = *w->egrad;
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 1.0);
    CHECK(e[2] == 0.0);
}

TEST_CASE("gradients accumulate across backward passes") {
    Graph g;
    auto w = euclid_param("w", Tensor({2, 2}, {0.5, -1, 2, 3}));
    g.sum(g.relu(g.parameter(w)));
    g.forward({});
    g.backward();
    Tensor once = *w->egrad;
    g.forward({});
    g.backward();
    CHECK(max_abs_diff(*w->egrad, scaled(once, 2.0)) == 0.0);

    autodiff::zero_grad({w});
    CHECK_FALSE(w->egrad.has_value());
    CHECK_FALSE(w->rgrad.has_value());
    autodiff::zero_grad({w}); // idempotent
    CHECK_FALSE(w->egrad.has_value());
}

TEST_CASE("a node feeding both matmul slots still gets the full gradient") {
    // f(w) = w w^T for a row vector, so egrad = 2w.
    Graph g;
    auto w = euclid_param("w", Tensor({1, 2}, {1, 2}));
    auto id = g.parameter(w);
    g.sum(g.matmul(id, id, false, true));
    const Tensor& out = g.forward({});
    CHECK(out[0] == doctest::Approx(5.0));
    g.backward();
    CHECK((*w->egrad)[0] == doctest::Approx(2.0));
    CHECK((*w->egrad)[1] == doctest::Approx(4.0));

    std::map<std::string, Tensor> none;
    CHECK(autodiff::grad_check(g, none, w, 1e-6) <= 1e-5);
}

TEST_CASE("grad_check tolerances and step validation") {
    Graph g;
    auto w = euclid_param("w", Tensor({4}, {0.5, -2, 3, 1}));
    g.sum(g.parameter(w));
    std::map<std::string, Tensor> none;
    // Linear objective: central differences are exact up to rounding.
    CHECK(autodiff::grad_check(g, none, w, 1e-6) <= 1e-9);
    Tensor before = w->value;
    CHECK(max_abs_diff(w->value, before) == 0.0); // value restored

    CHECK_THROWS_AS(autodiff::grad_check(g, none, w, 1e-2), Error);
    CHECK_THROWS_AS(autodiff::grad_check(g, none, w, 1e-9), Error);
}

TEST_CASE("malformed graphs are rejected at construction") {
    Graph g;
    auto a = g.input("a", {2, 3});
    auto b = g.input("b", {2, 3});
    CHECK_THROWS_AS(g.matmul(a, b), ShapeMismatch);
    CHECK_THROWS_AS(g.reshape(a, {4, 2}), ShapeMismatch);
    CHECK_THROWS_AS(g.add_bias(a, b, 1), ShapeMismatch);
    CHECK_THROWS_AS(g.input("a", {1}), Error); // duplicate name

    Graph h;
    auto lp = h.log_softmax_rows(h.input("x", {2, 4}));
    CHECK_THROWS_AS(h.nll_loss_mean(lp, {0, 5}), ShapeMismatch);   // target out of range
    CHECK_THROWS_AS(h.nll_loss_mean(lp, {0, 1, 2}), ShapeMismatch); // wrong count
}

TEST_CASE("lifecycle errors") {
    Graph g;
    auto x = g.input("x", {2, 2});
    auto r = g.relu(x);
    CHECK_THROWS_AS(g.backward(), BackwardBeforeForward);
    CHECK_THROWS_AS(g.output(r), BackwardBeforeForward);
    CHECK_THROWS_AS(g.forward({}), UnboundInput);
    g.forward({{"x", Tensor({2, 2}, {1, -1, 2, -2})}});
    CHECK_THROWS_AS(g.backward(), NonScalarOutput); // final node is rank 2
}

TEST_CASE("forward is bitwise deterministic") {
    Rng rng(5);
    Tensor xv = Tensor::gaussian({3, 4}, rng);
    Tensor wv = Tensor::gaussian({5, 4}, rng);
    auto run = [&](Tensor& out) {
        Graph g;
        auto w = euclid_param("w", wv);
        auto y = g.log_softmax_rows(g.matmul(g.input("x", {3, 4}), g.parameter(w), false, true));
        g.sum(y);
        g.forward({{"x", xv}});
        out = g.output(y);
    };
    Tensor first, second;
    run(first);
    run(second);
    CHECK(std::memcmp(first.data(), second.data(),
                      sizeof(double) * static_cast<std::size_t>(first.size())) == 0);
}

TEST_CASE("numeric gradients agree for every op") {
    Rng rng(17);
    std::map<std::string, Tensor> none;

    SUBCASE("matmul both orders") {
        auto w = euclid_param("w", Tensor::gaussian({3, 4}, rng));
        Graph g;
        auto x = g.input("x", {2, 3});
        g.sum(g.relu(g.matmul(x, g.parameter(w))));
        std::map<std::string, Tensor> in{{"x", Tensor::gaussian({2, 3}, rng)}};
        CHECK(autodiff::grad_check(g, in, w, 1e-6) <= 1e-5);
    }
    SUBCASE("batched matmul") {
        auto w = euclid_param("w", Tensor::gaussian({3, 6}, rng));
        Graph g;
        auto col = g.input("col", {2, 6, 5});
        g.sum(g.matmul(g.parameter(w), col));
        std::map<std::string, Tensor> in{{"col", Tensor::gaussian({2, 6, 5}, rng)}};
        CHECK(autodiff::grad_check(g, in, w, 1e-6) <= 1e-5);
    }
    SUBCASE("bias over rank-3 activations") {
        auto b = euclid_param("b", Tensor::gaussian({3}, rng));
        Graph g;
        auto x = g.input("x", {2, 3, 4});
        g.sum(g.add_bias(x, g.parameter(b), 1));
        std::map<std::string, Tensor> in{{"x", Tensor::gaussian({2, 3, 4}, rng)}};
        CHECK(autodiff::grad_check(g, in, b, 1e-6) <= 1e-5);
    }
    SUBCASE("scale and reshape") {
        auto w = euclid_param("w", Tensor::gaussian({4, 6}, rng));
        Graph g;
        g.sum(g.scale(g.reshape(g.parameter(w), {3, 8}), 2.5));
        CHECK(autodiff::grad_check(g, none, w, 1e-6) <= 1e-5);
    }
    SUBCASE("im2col") {
        auto w = euclid_param("w", Tensor::gaussian({2, 3, 5, 4}, rng));
        autodiff::Conv2dGeometry geom;
        geom.in_channels = 3;
        geom.height = 5;
        geom.width = 4;
        geom.kernel_h = 2;
        geom.kernel_w = 2;
        geom.stride = 1;
        geom.padding = 1;
        Graph g;
        g.sum(g.im2col(g.parameter(w), geom));
        CHECK(autodiff::grad_check(g, none, w, 1e-6) <= 1e-5);
    }
    SUBCASE("classification loss") {
        auto w = euclid_param("w", Tensor::gaussian({6, 4}, rng));
        Graph g;
        g.nll_loss_mean(g.log_softmax_rows(g.parameter(w)), {0, 3, 1, 2, 0, 1});
        CHECK(autodiff::grad_check(g, none, w, 1e-6) <= 1e-5);
    }
}

TEST_CASE("parameter construction validates membership") {
    auto st = ManifoldDescriptor::stiefel(2, 1);
    CHECK_THROWS_AS(Parameter("p", Tensor({2, 1}, {1, 1}), st), InvalidInitialValue);
    Parameter ok("p", Tensor({2, 1}, {0, 1}), st);
    CHECK_THROWS_AS(ok.set_value(Tensor({2, 1}, {2, 0})), InvalidInitialValue);
    ok.set_value(Tensor({2, 1}, {1, 0}));
    CHECK(ok.value[0] == 1.0);
}
