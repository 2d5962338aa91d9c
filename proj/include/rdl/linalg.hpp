#pragma once

#include "rdl/tensor.hpp"

namespace rdl::linalg {

// Thin QR of an n x p matrix (n >= p): q has orthonormal columns, r is
// upper triangular with a strictly positive diagonal, so the factorization
// is unique.
struct QrResult {
    Tensor q; // n x p
    Tensor r; // p x p
};

// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
// matching unit eigenvector columns, a = v diag(values) v^T.
struct SymEigResult {
    Tensor eigenvalues;  // length n
    Tensor eigenvectors; // n x n, column k pairs with eigenvalues[k]
};

enum class SpdFn { sqrt, inv_sqrt, log };

QrResult qr_thin(const Tensor& a);

// Input must be symmetric to within 1e-10 relative Frobenius error; it is
// symmetrized before factorization. Cyclic Jacobi.
SymEigResult sym_eig(const Tensor& a);

// Solves a x = b for SPD a via Cholesky; b is n x k.
Tensor spd_solve(const Tensor& a, const Tensor& b);

// Applies sqrt / 1/sqrt / log to the eigenvalues of an SPD matrix.
Tensor spd_sqrt_log(const Tensor& a, SpdFn mode);

// Cholesky success test; does not throw.
bool is_positive_definite(const Tensor& a);

} // namespace rdl::linalg
