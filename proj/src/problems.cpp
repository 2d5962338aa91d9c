#include "rdl/problems.hpp"

#include "rdl/errors.hpp"
#include "rdl/linalg.hpp"

namespace rdl::problems {

using linalg::SpdFn;

Rayleigh::Rayleigh(int n, int p, Rng& rng)
    : descriptor(manifold::ManifoldDescriptor::stiefel(n, p)) {
    a = sym_part(Tensor::gaussian({n, n}, rng));
}

double Rayleigh::value(const Tensor& x) const { return -trace(matmul(x, matmul(a, x), true)); }

Tensor Rayleigh::egrad(const Tensor& x) const { return scaled(matmul(a, x), -2.0); }

double Rayleigh::oracle() const {
    auto eig = linalg::sym_eig(a);
    const int n = a.rows();
    double top = 0.0;
    for (int i = n - descriptor.p; i < n; ++i) top += eig.eigenvalues[i]; // ascending order
    return -top;
}

KarcherMean::KarcherMean(int n, int k, Rng& rng)
    : descriptor(manifold::ManifoldDescriptor::positive_definite(n)) {
    if (k < 2) throw ValidationError("karcher_mean: k must be >= 2");
    for (int i = 0; i < k; ++i) points.push_back(manifold::rand(descriptor, rng));
}

double KarcherMean::value(const Tensor& x) const {
    double f = 0.0;
    for (const Tensor& a : points) {
        const double d = manifold::dist(descriptor, x, a);
        f += d * d;
    }
    return f;
}

Tensor KarcherMean::egrad(const Tensor& x) const {
    // grad dist(X,A)^2 = -2 Log_X(A); in Euclidean coordinates that is
    // -2 X^{-1/2} log(X^{-1/2} A X^{-1/2}) X^{-1/2}.
    const Tensor x_inv_sqrt = linalg::spd_sqrt_log(x, SpdFn::inv_sqrt);
    Tensor g = Tensor::zeros(x.shape());
    for (const Tensor& a : points) {
        Tensor mid = linalg::spd_sqrt_log(matmul(matmul(x_inv_sqrt, a), x_inv_sqrt), SpdFn::log);
        g = axpy(g, -2.0, matmul(matmul(x_inv_sqrt, mid), x_inv_sqrt));
    }
    return g;
}

Tensor KarcherMean::midpoint_oracle() const {
    if (points.size() != 2) throw Error("midpoint_oracle: needs exactly two points");
    const Tensor& a1 = points[0];
    const Tensor& a2 = points[1];
    const Tensor s = linalg::spd_sqrt_log(a1, SpdFn::sqrt);
    const Tensor si = linalg::spd_sqrt_log(a1, SpdFn::inv_sqrt);
    const Tensor inner_sqrt = linalg::spd_sqrt_log(matmul(matmul(si, a2), si), SpdFn::sqrt);
    return matmul(matmul(s, inner_sqrt), s);
}

} // namespace rdl::problems
