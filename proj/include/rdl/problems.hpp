#pragma once

#include <vector>

#include "rdl/manifold.hpp"
#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl::problems {

// Dominant-subspace problem: minimize f(X) = -trace(X^T A X) over
// Stiefel(n, p) for a fixed symmetric A. The minimum is the negated sum of
// A's p largest eigenvalues.
struct Rayleigh {
    Tensor a; // n x n symmetric
    manifold::ManifoldDescriptor descriptor;

    Rayleigh(int n, int p, Rng& rng);

    double value(const Tensor& x) const;
    Tensor egrad(const Tensor& x) const; // -2 A X
    double oracle() const;               // eigendecomposition of A
};

// Karcher (Frechet) mean: minimize f(X) = sum_i dist(X, A_i)^2 over the SPD
// cone under the affine-invariant metric. For k = 2 the minimizer is the
// closed-form geodesic midpoint.
struct KarcherMean {
    std::vector<Tensor> points; // SPD n x n
    manifold::ManifoldDescriptor descriptor;

    KarcherMean(int n, int k, Rng& rng);

    double value(const Tensor& x) const;
    // egrad of f; egrad2rgrad maps it to -2 sum_i Log_x(A_i).
    Tensor egrad(const Tensor& x) const;
    // Geodesic midpoint of points[0], points[1]; requires k = 2.
    Tensor midpoint_oracle() const;
};

} // namespace rdl::problems
