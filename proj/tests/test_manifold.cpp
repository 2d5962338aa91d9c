#include <doctest.h>

#include <cmath>
#include <cstring>

#include "rdl/errors.hpp"
#include "rdl/linalg.hpp"
#include "rdl/manifold.hpp"
#include "rdl/rng.hpp"

using namespace rdl;
using manifold::ManifoldDescriptor;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) ==
               0;
}

} // namespace

TEST_CASE("descriptor factories enforce their existence conditions") {
    CHECK_THROWS_AS(ManifoldDescriptor::stiefel(2, 3), ShapeMismatch);
    CHECK_THROWS_AS(ManifoldDescriptor::stiefel(3, 0), ShapeMismatch);
    CHECK_THROWS_AS(ManifoldDescriptor::positive_definite(0), ShapeMismatch);
    CHECK_THROWS_AS(ManifoldDescriptor::euclidean({}), ShapeMismatch);
    CHECK_THROWS_AS(ManifoldDescriptor::euclidean({3, 0}), ShapeMismatch);

    // The 1x1 case is allowed: the manifold degenerates to {+1, -1}.
    auto tiny = ManifoldDescriptor::stiefel(1, 1);
    CHECK(tiny.value_shape() == std::vector<int>{1, 1});

    auto wide = ManifoldDescriptor::stiefel(30, 10, true);
    CHECK(wide.value_shape() == std::vector<int>{10, 30});
}

TEST_CASE("descriptor to_string/parse round-trips") {
    for (const auto& d : {ManifoldDescriptor::euclidean({4}), ManifoldDescriptor::euclidean({2, 3}),
                          ManifoldDescriptor::stiefel(6, 3), ManifoldDescriptor::stiefel(6, 3, true),
                          ManifoldDescriptor::positive_definite(5)}) {
        CHECK(ManifoldDescriptor::parse(d.to_string()) == d);
    }
    CHECK_THROWS_AS(ManifoldDescriptor::parse("torus(3)"), ParseError);
    CHECK_THROWS_AS(ManifoldDescriptor::parse("stiefel(3)"), ParseError);
}

TEST_CASE("rand lands on the manifold deterministically") {
    auto st = ManifoldDescriptor::stiefel(5, 2);
    Rng rng(41);
    Tensor x = manifold::rand(st, rng);
    CHECK(frobenius_norm(sub(matmul(x, x, true, false), Tensor::identity(2))) <= 1e-10);

    auto pd = ManifoldDescriptor::positive_definite(3);
    Tensor y = manifold::rand(pd, rng);
    auto eig = linalg::sym_eig(y);
    for (int i = 0; i < 3; ++i) CHECK(eig.eigenvalues[i] >= 1.0 - 1e-9);

    Rng a(7), b(7);
    CHECK(bitwise_equal(manifold::rand(st, a), manifold::rand(st, b)));
}

TEST_CASE("proj closed forms") {
    auto st21 = ManifoldDescriptor::stiefel(2, 1);
    Tensor e1({2, 1}, {1, 0});
    Tensor g({2, 1}, {3.5, -2.0});
    Tensor u = manifold::proj(st21, e1, g);
    CHECK(u[0] == doctest::Approx(0.0));
    CHECK(u[1] == doctest::Approx(-2.0));

    // At the identity of the square Stiefel manifold the projection keeps
    // the skew part.
    auto st33 = ManifoldDescriptor::stiefel(3, 3);
    Rng rng(43);
    Tensor any = Tensor::gaussian({3, 3}, rng);
    Tensor skew = manifold::proj(st33, Tensor::identity(3), any);
    Tensor expected = scaled(sub(any, transpose(any)), 0.5);
    CHECK(max_abs_diff(skew, expected) <= 1e-14);

    auto pd2 = ManifoldDescriptor::positive_definite(2);
    Tensor gp({2, 2}, {1, 2, 0, 1});
    Tensor up = manifold::proj(pd2, Tensor::identity(2), gp);
    CHECK(up(0, 0) == 1.0);
    CHECK(up(0, 1) == 1.0);
    CHECK(up(1, 0) == 1.0);
    CHECK(up(1, 1) == 1.0);

    CHECK_THROWS_AS(manifold::proj(st21, e1, Tensor({3, 1})), ShapeMismatch);
}

TEST_CASE("egrad2rgrad closed forms") {
    auto pd = ManifoldDescriptor::positive_definite(3);
    Rng rng(47);
    Tensor s = sym_part(Tensor::gaussian({3, 3}, rng));
    CHECK(max_abs_diff(manifold::egrad2rgrad(pd, Tensor::identity(3), s), s) <= 1e-14);

    auto pd1 = ManifoldDescriptor::positive_definite(1);
    Tensor x({1, 1}, {2.0});
    Tensor e({1, 1}, {3.0});
    CHECK(manifold::egrad2rgrad(pd1, x, e)[0] == doctest::Approx(12.0));
}

TEST_CASE("egrad2rgrad satisfies the directional-derivative identity") {
    // f(Y) = sum of squared entries, so egrad = 2Y everywhere.
    const double h = 1e-6;
    std::uint64_t seed = 50;
    for (const auto& d :
         {ManifoldDescriptor::euclidean({4, 3}), ManifoldDescriptor::stiefel(5, 3),
          ManifoldDescriptor::stiefel(5, 3, true), ManifoldDescriptor::positive_definite(3)}) {
        Rng rng(seed++);
        for (int trial = 0; trial < 5; ++trial) {
            Tensor x = manifold::rand(d, rng);
            Tensor u = manifold::proj(d, x, Tensor::gaussian(d.value_shape(), rng));
            Tensor rgrad = manifold::egrad2rgrad(d, x, scaled(x, 2.0));
            const double lhs = manifold::inner(d, x, rgrad, u);
            auto f = [](const Tensor& y) { return dot(y, y); };
            const double rhs =
                (f(manifold::retr(d, x, u, h)) - f(manifold::retr(d, x, u, -h))) / (2 * h);
            CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)) <= 1e-5);
        }
    }
}

TEST_CASE("retraction closed forms and zero-step identity") {
    auto st21 = ManifoldDescriptor::stiefel(2, 1);
    Tensor e1({2, 1}, {1, 0});
    Tensor u({2, 1}, {0, 1});
    for (double t : {0.3, 1.0, 2.5}) {
        Tensor y = manifold::retr(st21, e1, u, t);
        const double norm = std::sqrt(1 + t * t);
        CHECK(y[0] == doctest::Approx(1.0 / norm));
        CHECK(y[1] == doctest::Approx(t / norm));
    }

    auto pd1 = ManifoldDescriptor::positive_definite(1);
    Tensor x({1, 1}, {1.0});
    Tensor v({1, 1}, {-1.9});
    CHECK(manifold::retr(pd1, x, v, 1.0)[0] == doctest::Approx(0.905).epsilon(1e-12));

    // Zero step (or zero direction) must return the identical bits.
    std::uint64_t seed = 60;
    for (const auto& d : {ManifoldDescriptor::euclidean({3, 2}), ManifoldDescriptor::stiefel(4, 2),
                          ManifoldDescriptor::positive_definite(3)}) {
        Rng rng(seed++);
        Tensor p = manifold::rand(d, rng);
        Tensor w = manifold::proj(d, p, Tensor::gaussian(d.value_shape(), rng));
        CHECK(bitwise_equal(manifold::retr(d, p, w, 0.0), p));
        CHECK(bitwise_equal(manifold::retr(d, p, Tensor::zeros(d.value_shape()), 1.0), p));
    }
}

TEST_CASE("retraction keeps membership across step sizes") {
    std::uint64_t seed = 70;
    for (const auto& d :
         {ManifoldDescriptor::euclidean({3, 2}), ManifoldDescriptor::stiefel(6, 3),
          ManifoldDescriptor::stiefel(6, 3, true), ManifoldDescriptor::positive_definite(4)}) {
        Rng rng(seed++);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor x = manifold::rand(d, rng);
            Tensor u = manifold::proj(d, x, Tensor::gaussian(d.value_shape(), rng));
            for (double t : {1e-3, 1e-1, 1.0}) {
                CHECK(manifold::is_point(d, manifold::retr(d, x, u, t), 1e-8));
            }
        }
    }
}

TEST_CASE("spd retraction stays positive definite under huge steps") {
    auto pd = ManifoldDescriptor::positive_definite(3);
    Rng rng(73);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = manifold::rand(pd, rng);
        Tensor u = manifold::proj(pd, x, Tensor::gaussian({3, 3}, rng));
        const double t = (trial % 2 == 0) ? 1.0 : 50.0 * frobenius_norm(x) /
                                                      std::max(1e-12, frobenius_norm(u));
        Tensor y = manifold::retr(pd, x, u, t);
        CHECK(linalg::is_positive_definite(y));
    }
}

TEST_CASE("rank-collapsing stiefel step is reported") {
    auto st = ManifoldDescriptor::stiefel(2, 1);
    Tensor x({2, 1}, {1, 0});
    // x + u has zero first column when u = -x; u is not tangent but retr
    // only requires the ambient arithmetic.
    Tensor u({2, 1}, {-1, 0});
    CHECK_THROWS_AS(manifold::retr(st, x, u, 1.0), RankDeficient);
}

TEST_CASE("inner products") {
    auto pd = ManifoldDescriptor::positive_definite(2);
    Rng rng(79);
    Tensor u = sym_part(Tensor::gaussian({2, 2}, rng));
    Tensor v = sym_part(Tensor::gaussian({2, 2}, rng));
    CHECK(manifold::inner(pd, Tensor::identity(2), u, v) ==
          doctest::Approx(trace(matmul(u, v))));

    auto pd1 = ManifoldDescriptor::positive_definite(1);
    Tensor two({1, 1}, {2.0});
    CHECK(manifold::inner(pd1, two, two, two) == doctest::Approx(1.0));

    auto st = ManifoldDescriptor::stiefel(4, 2);
    Tensor x = manifold::rand(st, rng);
    Tensor w = manifold::proj(st, x, Tensor::gaussian({4, 2}, rng));
    CHECK(manifold::inner(st, x, w, w) > 0);
}

TEST_CASE("transport closed forms and tangency") {
    auto st = ManifoldDescriptor::stiefel(4, 2);
    Rng rng(83);
    Tensor x = manifold::rand(st, rng);
    Tensor u = manifold::proj(st, x, Tensor::gaussian({4, 2}, rng));
    CHECK(max_abs_diff(manifold::transp(st, x, x, u), u) <= 1e-12);

    auto st33 = ManifoldDescriptor::stiefel(3, 3);
    Tensor any = Tensor::gaussian({3, 3}, rng);
    Tensor moved = manifold::transp(st33, manifold::rand(st33, rng), Tensor::identity(3), any);
    CHECK(max_abs_diff(moved, scaled(sub(any, transpose(any)), 0.5)) <= 1e-14);

    auto pd = ManifoldDescriptor::positive_definite(3);
    Tensor s = sym_part(Tensor::gaussian({3, 3}, rng));
    CHECK(bitwise_equal(manifold::transp(pd, manifold::rand(pd, rng), manifold::rand(pd, rng), s),
                        s));

    // Transported vectors are tangent at the destination.
    Tensor y = manifold::retr(st, x, u, 0.5);
    CHECK(manifold::is_tangent(st, y, manifold::transp(st, x, y, u), 1e-8));
}

TEST_CASE("membership predicates") {
    CHECK(manifold::is_point(ManifoldDescriptor::stiefel(2, 2), Tensor::identity(2), 1e-8));
    CHECK_FALSE(manifold::is_point(ManifoldDescriptor::positive_definite(2),
                                   Tensor({2, 2}, {1, 2, 2, 1}), 1e-8));
    CHECK(manifold::is_tangent(ManifoldDescriptor::stiefel(2, 1), Tensor({2, 1}, {1, 0}),
                               Tensor({2, 1}, {0, -7.0}), 1e-8));
    CHECK(manifold::membership_residual(ManifoldDescriptor::euclidean({2, 2}),
                                        Tensor({2, 2}, {9, 9, 9, 9})) == 0.0);
}

TEST_CASE("spd distance closed forms") {
    auto pd1 = ManifoldDescriptor::positive_definite(1);
    Tensor one({1, 1}, {1.0});
    CHECK(manifold::dist(pd1, one, one) == doctest::Approx(0.0));
    Tensor e2({1, 1}, {std::exp(2.0)});
    CHECK(manifold::dist(pd1, one, e2) == doctest::Approx(2.0));

    auto pd2 = ManifoldDescriptor::positive_definite(2);
    Tensor a = Tensor::identity(2);
    Tensor b({2, 2}, {std::exp(1.0), 0, 0, std::exp(3.0)});
    CHECK(manifold::dist(pd2, a, b) == doctest::Approx(std::sqrt(10.0)));
    CHECK(manifold::dist(pd2, b, a) == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("transposed descriptors act on the stored transpose") {
    auto wide = ManifoldDescriptor::stiefel(6, 2, true);
    Rng rng(89);
    Tensor w = manifold::rand(wide, rng); // stored 2 x 6
    REQUIRE(w.shape() == std::vector<int>{2, 6});
    // Rows are orthonormal in the stored orientation.
    CHECK(frobenius_norm(sub(matmul(w, w, false, true), Tensor::identity(2))) <= 1e-10);

    Tensor g = Tensor::gaussian({2, 6}, rng);
    Tensor u = manifold::proj(wide, w, g);
    CHECK(manifold::is_tangent(wide, w, u, 1e-8));
    Tensor y = manifold::retr(wide, w, u, 0.7);
    CHECK(manifold::is_point(wide, y, 1e-8));
}
