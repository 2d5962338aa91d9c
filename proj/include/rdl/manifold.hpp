#pragma once

#include <string>
#include <vector>

#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl::manifold {

enum class Kind { euclidean, stiefel, positive_definite };

// Tagged manifold descriptor. Stiefel(n, p) requires n >= p; when a weight
// is stored as the p x n transpose of the manifold point, `transposed` makes
// every operation act on the transpose so callers never branch on
// orientation. PositiveDefinite(n) is the cone of SPD n x n matrices under
// the affine-invariant metric.
struct ManifoldDescriptor {
    Kind kind = Kind::euclidean;
    std::vector<int> euclidean_shape; // Kind::euclidean only
    int n = 0;                        // stiefel rows / pd size
    int p = 0;                        // stiefel columns
    bool transposed = false;          // stiefel only

    static ManifoldDescriptor euclidean(std::vector<int> shape);
    static ManifoldDescriptor stiefel(int n, int p, bool transposed = false);
    static ManifoldDescriptor positive_definite(int n);

    // Shape of the stored tensor (the transposed orientation for a
    // transposed Stiefel descriptor).
    std::vector<int> value_shape() const;
    bool is_euclidean() const { return kind == Kind::euclidean; }

    std::string to_string() const;
    static ManifoldDescriptor parse(const std::string& s);

    bool operator==(const ManifoldDescriptor& other) const;
};

// Random point on the manifold. Stiefel: q-factor of a Gaussian matrix.
// PositiveDefinite: A A^T + I for Gaussian A. Euclidean: Gaussian entries.
Tensor rand(const ManifoldDescriptor& d, Rng& rng);

// Orthogonal projection of an ambient vector onto the tangent space at x.
Tensor proj(const ManifoldDescriptor& d, const Tensor& x, const Tensor& g);

// Riemannian gradient from the back-propagated Euclidean gradient.
Tensor egrad2rgrad(const ManifoldDescriptor& d, const Tensor& x, const Tensor& egrad);

// Retraction of step * u at x back onto the manifold. retr(x, u, 0) == x
// bitwise; first-order agreement with x + step * u.
Tensor retr(const ManifoldDescriptor& d, const Tensor& x, const Tensor& u, double step);

// Riemannian metric at x.
double inner(const ManifoldDescriptor& d, const Tensor& x, const Tensor& u, const Tensor& v);

// Vector transport of u (tangent at x) to the tangent space at y.
Tensor transp(const ManifoldDescriptor& d, const Tensor& x, const Tensor& y, const Tensor& u);

bool is_point(const ManifoldDescriptor& d, const Tensor& t, double tol);
bool is_tangent(const ManifoldDescriptor& d, const Tensor& x, const Tensor& t, double tol);

// Geodesic distance, PositiveDefinite only:
// || log(x^{-1/2} y x^{-1/2}) ||_F.
double dist(const ManifoldDescriptor& d, const Tensor& x, const Tensor& y);

// Scalar violation of the membership predicate; 0 for Euclidean.
double membership_residual(const ManifoldDescriptor& d, const Tensor& t);

} // namespace rdl::manifold
