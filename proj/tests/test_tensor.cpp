#include <doctest.h>

#include <cstring>
#include <sstream>

#include "rdl/errors.hpp"
#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

using namespace rdl;

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor(std::vector<int>{}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({-1}), ShapeMismatch);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeMismatch);

    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    for (int i = 0; i < 6; ++i) CHECK(t[i] == 0.0);

    Tensor scalar({1}, {4.5});
    CHECK(scalar.size() == 1);
    CHECK(scalar[0] == 4.5);
}

TEST_CASE("tensor constructors") {
    Tensor f = Tensor::full({2, 2}, 7.0);
    for (int i = 0; i < 4; ++i) CHECK(f[i] == 7.0);

    Tensor id = Tensor::identity(3);
    CHECK(id(0, 0) == 1.0);
    CHECK(id(0, 1) == 0.0);
    CHECK(trace(id) == 3.0);

    Rng rng(1);
    Tensor g = Tensor::gaussian({100}, rng);
    bool varied = false;
    for (int i = 1; i < g.size(); ++i) varied = varied || g[i] != g[0];
    CHECK(varied);

    Rng rng2(1);
    Tensor g2 = Tensor::gaussian({100}, rng2);
    CHECK(std::memcmp(g.data(), g2.data(), sizeof(double) * 100) == 0);

    Rng rng3(2);
    Tensor u = Tensor::uniform({50}, -0.25, 0.25, rng3);
    for (int i = 0; i < u.size(); ++i) {
        CHECK(u[i] >= -0.25);
        CHECK(u[i] < 0.25);
    }
}

TEST_CASE("elementwise helpers") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {10.0, 20.0});
    CHECK(add(a, b)[1] == 22.0);
    CHECK(sub(b, a)[0] == 9.0);
    CHECK(scaled(a, 3.0)[1] == 6.0);
    CHECK(axpy(a, 2.0, b)[0] == 21.0); // a + 2 b
    CHECK(hadamard(a, b)[1] == 40.0);
    CHECK(dot(a, b) == 50.0);
    CHECK(frobenius_norm(Tensor({2}, {3.0, 4.0})) == doctest::Approx(5.0));
    CHECK(max_abs(Tensor({3}, {1.0, -7.0, 2.0})) == 7.0);
    CHECK(max_abs_diff(a, b) == 18.0);
    CHECK_THROWS_AS(add(a, Tensor({3})), ShapeMismatch);
}

TEST_CASE("matmul covers every transpose combination") {
    // Reference product computed by hand: A (2x3), B (3x2).
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);

    // Each flagged form must match the explicit transpose.
    Tensor at = transpose(a);
    Tensor bt = transpose(b);
    CHECK(max_abs_diff(matmul(at, b, true, false), c) == 0.0);
    CHECK(max_abs_diff(matmul(a, bt, false, true), c) == 0.0);
    CHECK(max_abs_diff(matmul(at, bt, true, true), c) == 0.0);

    CHECK_THROWS_AS(matmul(a, a), ShapeMismatch);
    CHECK_THROWS_AS(matmul(Tensor({2}), b), ShapeMismatch);
}

TEST_CASE("matmul_batched multiplies one matrix against each slice") {
    Rng rng(5);
    Tensor a = Tensor::gaussian({3, 4}, rng);
    Tensor b = Tensor::gaussian({2, 4, 5}, rng);
    Tensor c = matmul_batched(a, b);
    REQUIRE(c.shape() == std::vector<int>{2, 3, 5});
    for (int k = 0; k < 2; ++k) {
        Tensor slice({4, 5});
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) slice(i, j) = b(k, i, j);
        Tensor expect = matmul(a, slice);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) CHECK(c(k, i, j) == doctest::Approx(expect(i, j)));
    }
    CHECK_THROWS_AS(matmul_batched(a, Tensor({2, 3, 5})), ShapeMismatch);
}

TEST_CASE("transpose, trace, sym_part") {
    Tensor m({2, 2}, {1, 2, 3, 4});
    Tensor mt = transpose(m);
    CHECK(mt(0, 1) == 3.0);
    CHECK(trace(m) == 5.0);
    Tensor s = sym_part(m);
    CHECK(s(0, 1) == 2.5);
    CHECK(s(1, 0) == 2.5);
    CHECK_THROWS_AS(trace(Tensor({2, 3})), ShapeMismatch);
}

TEST_CASE("reshape preserves data and rejects bad sizes") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = reshaped(t, {3, 2});
    CHECK(r(2, 1) == 6.0);
    CHECK_THROWS_AS(reshaped(t, {4, 2}), ShapeMismatch);
}

TEST_CASE("text serialization round-trips bitwise") {
    Rng rng(9);
    Tensor t = Tensor::gaussian({3, 4}, rng);
    t[0] = 1.0 / 3.0;
    t[1] = -2.2250738585072014e-308; // smallest normal, stress the formatter
    t[2] = 12345678901234567.0;

    std::stringstream ss;
    write_tensor_text(ss, t);
    Tensor back = read_tensor_text(ss);
    REQUIRE(back.shape() == t.shape());
    CHECK(std::memcmp(back.data(), t.data(), sizeof(double) * static_cast<std::size_t>(t.size())) ==
          0);

    std::string text = ss.str();
    CHECK(text.rfind("shape: 3 4\n", 0) == 0);
}

TEST_CASE("text deserialization rejects malformed input") {
    std::stringstream missing("not a shape line\n1 2\n");
    CHECK_THROWS_AS(read_tensor_text(missing), ParseError);

    std::stringstream short_data("shape: 2 2\n1 2 3\n");
    CHECK_THROWS_AS(read_tensor_text(short_data), ParseError);
}

TEST_CASE("format_double survives a parse round-trip") {
    for (double v : {1.0 / 3.0, 0.1, -1e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}
