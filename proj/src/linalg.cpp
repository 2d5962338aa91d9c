#include "rdl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace rdl::linalg {

namespace {

// Lower-triangular Cholesky factor, or nullopt on a non-positive pivot.
std::optional<Tensor> cholesky(const Tensor& a) {
    const int n = a.rows();
    Tensor l({n, n});
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return std::nullopt;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

void require_square(const Tensor& a, const char* op) {
    if (a.rank() != 2 || a.rows() != a.cols()) {
        throw ShapeMismatch(std::string(op) + ": expected a square matrix, got " +
                            shape_to_string(a.shape()));
    }
}

// Off-diagonal Frobenius norm, the Jacobi convergence measure.
double off_norm(const Tensor& a) {
    const int n = a.rows();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace

QrResult qr_thin(const Tensor& a) {
    if (a.rank() != 2) throw ShapeMismatch("qr_thin: expected rank 2, got " + shape_to_string(a.shape()));
    const int n = a.rows(), p = a.cols();
    if (n < p) throw ShapeMismatch("qr_thin: need n >= p, got " + shape_to_string(a.shape()));

    const double norm_a = frobenius_norm(a);
    Tensor work = a; // reduced in place to R
    // Householder vectors, one per column, stored densely.
    std::vector<std::vector<double>> reflectors(static_cast<std::size_t>(p));

    for (int k = 0; k < p; ++k) {
        double xnorm = 0.0;
        for (int i = k; i < n; ++i) xnorm += work(i, k) * work(i, k);
        xnorm = std::sqrt(xnorm);
        if (xnorm <= 1e-12 * std::max(norm_a, 1e-300)) {
            throw RankDeficient("qr_thin: column " + std::to_string(k) +
                                " is numerically zero during factorization");
        }
        const double alpha = work(k, k) >= 0.0 ? -xnorm : xnorm;
        std::vector<double> v(static_cast<std::size_t>(n - k));
        v[0] = work(k, k) - alpha;
        for (int i = k + 1; i < n; ++i) v[static_cast<std::size_t>(i - k)] = work(i, k);
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 > 0.0) {
            // Apply H = I - 2 v v^T / (v^T v) to the trailing block.
            for (int j = k; j < p; ++j) {
                double s = 0.0;
                for (int i = k; i < n; ++i) s += v[static_cast<std::size_t>(i - k)] * work(i, j);
                const double f = 2.0 * s / vnorm2;
                for (int i = k; i < n; ++i) work(i, j) -= f * v[static_cast<std::size_t>(i - k)];
            }
        }
        work(k, k) = alpha;
        for (int i = k + 1; i < n; ++i) work(i, k) = 0.0;
        reflectors[static_cast<std::size_t>(k)] = std::move(v);
    }

    // Accumulate the thin Q by applying the reflectors in reverse to I(n x p).
    Tensor q({n, p});
    for (int j = 0; j < p; ++j) q(j, j) = 1.0;
    for (int k = p - 1; k >= 0; --k) {
        const auto& v = reflectors[static_cast<std::size_t>(k)];
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;
        for (int j = 0; j < p; ++j) {
            double s = 0.0;
            for (int i = k; i < n; ++i) s += v[static_cast<std::size_t>(i - k)] * q(i, j);
            const double f = 2.0 * s / vnorm2;
            for (int i = k; i < n; ++i) q(i, j) -= f * v[static_cast<std::size_t>(i - k)];
        }
    }

    Tensor r({p, p});
    for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) r(i, j) = work(i, j);

    // Sign fix: force a positive diagonal on r so the factorization is unique.
    for (int k = 0; k < p; ++k) {
        if (r(k, k) < 0.0) {
            for (int j = k; j < p; ++j) r(k, j) = -r(k, j);
            for (int i = 0; i < n; ++i) q(i, k) = -q(i, k);
        } else if (r(k, k) == 0.0) {
            throw RankDeficient("qr_thin: zero diagonal in r at column " + std::to_string(k));
        }
    }
    return {std::move(q), std::move(r)};
}

SymEigResult sym_eig(const Tensor& a) {
    require_square(a, "sym_eig");
    const int n = a.rows();
    const double norm_a = frobenius_norm(a);
    {
        double asym = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double d = a(i, j) - a(j, i);
                asym += d * d;
            }
        if (std::sqrt(asym) > 1e-10 * std::max(norm_a, 1e-300)) {
            throw NotSymmetric("sym_eig: input is not symmetric");
        }
    }

    Tensor b = sym_part(a);
    Tensor v = Tensor::identity(n);
    const double threshold = 1e-12 * std::max(norm_a, 1e-300);

    for (int sweep = 0; sweep < 100 && off_norm(b) > threshold; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = b(p, q);
                if (std::fabs(apq) <= threshold / (n * n)) continue;
                const double theta = (b(q, q) - b(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // B <- J^T B J with the rotation in the (p, q) plane.
                for (int i = 0; i < n; ++i) {
                    const double bip = b(i, p), biq = b(i, q);
                    b(i, p) = c * bip - s * biq;
                    b(i, q) = s * bip + c * biq;
                }
                for (int j = 0; j < n; ++j) {
                    const double bpj = b(p, j), bqj = b(q, j);
                    b(p, j) = c * bpj - s * bqj;
                    b(q, j) = s * bpj + c * bqj;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return b(i, i) < b(j, j); });

    Tensor values({n});
    Tensor vectors({n, n});
    for (int k = 0; k < n; ++k) {
        const int src = order[static_cast<std::size_t>(k)];
        values[k] = b(src, src);
        for (int i = 0; i < n; ++i) vectors(i, k) = v(i, src);
    }
    return {std::move(values), std::move(vectors)};
}

Tensor spd_solve(const Tensor& a, const Tensor& b) {
    require_square(a, "spd_solve");
    const int n = a.rows();
    if (b.rank() != 2 || b.rows() != n) {
        throw ShapeMismatch("spd_solve: rhs shape " + shape_to_string(b.shape()) +
                            " incompatible with " + shape_to_string(a.shape()));
    }
    auto l = cholesky(sym_part(a));
    if (!l) throw NotPositiveDefinite("spd_solve: non-positive pivot in Cholesky factorization");

    const int k = b.cols();
    Tensor x = b;
    // Forward substitution L y = b, then back substitution L^T x = y.
    for (int col = 0; col < k; ++col) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, col);
            for (int j = 0; j < i; ++j) s -= (*l)(i, j) * x(j, col);
            x(i, col) = s / (*l)(i, i);
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, col);
            for (int j = i + 1; j < n; ++j) s -= (*l)(j, i) * x(j, col);
            x(i, col) = s / (*l)(i, i);
        }
    }
    return x;
}

Tensor spd_sqrt_log(const Tensor& a, SpdFn mode) {
    require_square(a, "spd_sqrt_log");
    SymEigResult eig = sym_eig(a);
    const int n = a.rows();
    const double lmax = eig.eigenvalues[n - 1];
    Tensor f({n});
    for (int i = 0; i < n; ++i) {
        const double lam = eig.eigenvalues[i];
        if (lam <= 1e-12 * lmax) {
            throw NotPositiveDefinite("spd_sqrt_log: eigenvalue " + format_double(lam) +
                                      " is not positive");
        }
        switch (mode) {
            case SpdFn::sqrt: f[i] = std::sqrt(lam); break;
            case SpdFn::inv_sqrt: f[i] = 1.0 / std::sqrt(lam); break;
            case SpdFn::log: f[i] = std::log(lam); break;
        }
    }
    // V diag(f) V^T
    Tensor scaled_v({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scaled_v(i, j) = eig.eigenvectors(i, j) * f[j];
    return sym_part(matmul(scaled_v, eig.eigenvectors, false, true));
}

bool is_positive_definite(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols()) return false;
    return cholesky(sym_part(a)).has_value();
}

} // namespace rdl::linalg
