#include "rdl/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rdl/errors.hpp"
#include "rdl/linalg.hpp"

namespace rdl::manifold {

namespace {

void check_value_shape(const ManifoldDescriptor& d, const Tensor& t, const char* op) {
    if (t.shape() != d.value_shape()) {
        throw ShapeMismatch(std::string(op) + ": expected shape " +
                            shape_to_string(d.value_shape()) + ", got " +
                            shape_to_string(t.shape()));
    }
}

// Stored orientation -> canonical n x p orientation.
Tensor canon(const ManifoldDescriptor& d, const Tensor& t) {
    return d.transposed ? transpose(t) : t;
}

Tensor store(const ManifoldDescriptor& d, const Tensor& t) {
    return d.transposed ? transpose(t) : t;
}

bool all_zero(const Tensor& t) {
    for (int i = 0; i < t.size(); ++i)
        if (t[i] != 0.0) return false;
    return true;
}

Tensor stiefel_proj(const Tensor& x, const Tensor& g) {
    // U = G - X sym(X^T G)
    Tensor xtg = matmul(x, g, true, false);
    return sub(g, matmul(x, sym_part(xtg)));
}

} // namespace

ManifoldDescriptor ManifoldDescriptor::euclidean(std::vector<int> shape) {
    if (shape.empty()) throw ShapeMismatch("euclidean manifold needs a shape of rank >= 1");
    for (int d : shape)
        if (d < 1) throw ShapeMismatch("euclidean manifold dims must be >= 1");
    ManifoldDescriptor d;
    d.kind = Kind::euclidean;
    d.euclidean_shape = std::move(shape);
    return d;
}

ManifoldDescriptor ManifoldDescriptor::stiefel(int n, int p, bool transposed) {
    if (p < 1 || n < p) {
        throw ShapeMismatch("stiefel(" + std::to_string(n) + ", " + std::to_string(p) +
                            "): requires n >= p >= 1");
    }
    ManifoldDescriptor d;
    d.kind = Kind::stiefel;
    d.n = n;
    d.p = p;
    d.transposed = transposed;
    return d;
}

ManifoldDescriptor ManifoldDescriptor::positive_definite(int n) {
    if (n < 1) throw ShapeMismatch("positive_definite(" + std::to_string(n) + "): requires n >= 1");
    ManifoldDescriptor d;
    d.kind = Kind::positive_definite;
    d.n = n;
    return d;
}

std::vector<int> ManifoldDescriptor::value_shape() const {
    switch (kind) {
        case Kind::euclidean: return euclidean_shape;
        case Kind::stiefel: return transposed ? std::vector<int>{p, n} : std::vector<int>{n, p};
        case Kind::positive_definite: return {n, n};
    }
    return {};
}

std::string ManifoldDescriptor::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::euclidean: {
            os << "euclidean(";
            for (std::size_t i = 0; i < euclidean_shape.size(); ++i) {
                if (i) os << ',';
                os << euclidean_shape[i];
            }
            os << ')';
            break;
        }
        case Kind::stiefel:
            os << "stiefel(" << n << ',' << p << (transposed ? ",transposed" : "") << ')';
            break;
        case Kind::positive_definite:
            os << "positive_definite(" << n << ')';
            break;
    }
    return os.str();
}

ManifoldDescriptor ManifoldDescriptor::parse(const std::string& s) {
    const auto open = s.find('(');
    const auto close = s.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ParseError("bad manifold descriptor: '" + s + "'");
    }
    const std::string name = s.substr(0, open);
    std::string args = s.substr(open + 1, close - open - 1);
    std::vector<std::string> parts;
    std::istringstream as(args);
    std::string part;
    while (std::getline(as, part, ',')) parts.push_back(part);

    auto to_int = [&](const std::string& v) {
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw ParseError("bad manifold descriptor argument '" + v + "' in '" + s + "'");
        }
    };

    if (name == "euclidean") {
        std::vector<int> shape;
        for (const auto& v : parts) shape.push_back(to_int(v));
        return euclidean(std::move(shape));
    }
    if (name == "stiefel") {
        if (parts.size() < 2 || parts.size() > 3) {
            throw ParseError("stiefel descriptor needs 2 or 3 arguments: '" + s + "'");
        }
        const bool tr = parts.size() == 3 && parts[2] == "transposed";
        if (parts.size() == 3 && !tr) throw ParseError("bad stiefel flag in '" + s + "'");
        return stiefel(to_int(parts[0]), to_int(parts[1]), tr);
    }
    if (name == "positive_definite") {
        if (parts.size() != 1) throw ParseError("positive_definite descriptor needs 1 argument");
        return positive_definite(to_int(parts[0]));
    }
    throw ParseError("unknown manifold kind '" + name + "'");
}

bool ManifoldDescriptor::operator==(const ManifoldDescriptor& other) const {
    return kind == other.kind && euclidean_shape == other.euclidean_shape && n == other.n &&
           p == other.p && transposed == other.transposed;
}

Tensor rand(const ManifoldDescriptor& d, Rng& rng) {
    switch (d.kind) {
        case Kind::euclidean:
            return Tensor::gaussian(d.euclidean_shape, rng);
        case Kind::stiefel: {
            Tensor a = Tensor::gaussian({d.n, d.p}, rng);
            return store(d, linalg::qr_thin(a).q);
        }
        case Kind::positive_definite: {
            Tensor a = Tensor::gaussian({d.n, d.n}, rng);
            Tensor m = matmul(a, a, false, true);
            for (int i = 0; i < d.n; ++i) m(i, i) += 1.0;
            return sym_part(m);
        }
    }
    throw Error("rand: unreachable");
}

Tensor proj(const ManifoldDescriptor& d, const Tensor& x, const Tensor& g) {
    check_value_shape(d, x, "proj");
    check_value_shape(d, g, "proj");
    switch (d.kind) {
        case Kind::euclidean:
            return g;
        case Kind::stiefel:
            return store(d, stiefel_proj(canon(d, x), canon(d, g)));
        case Kind::positive_definite:
            return sym_part(g);
    }
    throw Error("proj: unreachable");
}

Tensor egrad2rgrad(const ManifoldDescriptor& d, const Tensor& x, const Tensor& egrad) {
    check_value_shape(d, x, "egrad2rgrad");
    check_value_shape(d, egrad, "egrad2rgrad");
    switch (d.kind) {
        case Kind::euclidean:
            return egrad;
        case Kind::stiefel:
            // Embedded metric, so the Riemannian gradient is the projection.
            return store(d, stiefel_proj(canon(d, x), canon(d, egrad)));
        case Kind::positive_definite:
            // Affine-invariant metric: X sym(G) X.
            return matmul(matmul(x, sym_part(egrad)), x);
    }
    throw Error("egrad2rgrad: unreachable");
}

Tensor retr(const ManifoldDescriptor& d, const Tensor& x, const Tensor& u, double step) {
    check_value_shape(d, x, "retr");
    check_value_shape(d, u, "retr");
    if (step == 0.0 || all_zero(u)) return x;
    switch (d.kind) {
        case Kind::euclidean:
            return axpy(x, step, u);
        case Kind::stiefel: {
            Tensor moved = axpy(canon(d, x), step, canon(d, u));
            return store(d, linalg::qr_thin(moved).q);
        }
        case Kind::positive_definite: {
            // X + tU + (t^2/2) U X^{-1} U, a second-order SPD-preserving
            // retraction.
            Tensor us = sym_part(u);
            Tensor xinv_u = linalg::spd_solve(x, us);
            Tensor quad = matmul(us, xinv_u);
            Tensor out = axpy(axpy(x, step, us), 0.5 * step * step, quad);
            out = sym_part(out);
            if (!linalg::is_positive_definite(out)) {
                throw NotPositiveDefinite("retr: SPD retraction left the cone");
            }
            return out;
        }
    }
    throw Error("retr: unreachable");
}

double inner(const ManifoldDescriptor& d, const Tensor& x, const Tensor& u, const Tensor& v) {
    check_value_shape(d, x, "inner");
    check_value_shape(d, u, "inner");
    check_value_shape(d, v, "inner");
    switch (d.kind) {
        case Kind::euclidean:
        case Kind::stiefel:
            // trace(U^T V) is the plain entrywise inner product.
            return dot(u, v);
        case Kind::positive_definite: {
            Tensor w1 = linalg::spd_solve(x, u);
            Tensor w2 = linalg::spd_solve(x, v);
            return trace(matmul(w1, w2));
        }
    }
    throw Error("inner: unreachable");
}

Tensor transp(const ManifoldDescriptor& d, const Tensor& x, const Tensor& y, const Tensor& u) {
    check_value_shape(d, x, "transp");
    check_value_shape(d, y, "transp");
    check_value_shape(d, u, "transp");
    switch (d.kind) {
        case Kind::euclidean:
        case Kind::positive_definite:
            // The tangent space is one fixed linear space; identity transport.
            return u;
        case Kind::stiefel:
            return proj(d, y, u);
    }
    throw Error("transp: unreachable");
}

bool is_point(const ManifoldDescriptor& d, const Tensor& t, double tol) {
    if (t.shape() != d.value_shape()) return false;
    switch (d.kind) {
        case Kind::euclidean:
            return true;
        case Kind::stiefel: {
            Tensor x = canon(d, t);
            Tensor gram = matmul(x, x, true, false);
            return frobenius_norm(sub(gram, Tensor::identity(d.p))) <= tol;
        }
        case Kind::positive_definite: {
            if (frobenius_norm(sub(t, transpose(t))) > tol) return false;
            return linalg::is_positive_definite(t);
        }
    }
    return false;
}

bool is_tangent(const ManifoldDescriptor& d, const Tensor& x, const Tensor& t, double tol) {
    if (x.shape() != d.value_shape() || t.shape() != d.value_shape()) return false;
    switch (d.kind) {
        case Kind::euclidean:
            return true;
        case Kind::stiefel: {
            Tensor xc = canon(d, x), uc = canon(d, t);
            Tensor xtu = matmul(xc, uc, true, false);
            return frobenius_norm(add(xtu, transpose(xtu))) <= tol;
        }
        case Kind::positive_definite:
            return frobenius_norm(sub(t, transpose(t))) <= tol;
    }
    return false;
}

double dist(const ManifoldDescriptor& d, const Tensor& x, const Tensor& y) {
    if (d.kind != Kind::positive_definite) {
        throw Error("dist: only defined for the positive_definite manifold");
    }
    check_value_shape(d, x, "dist");
    check_value_shape(d, y, "dist");
    Tensor inv_sqrt_x = linalg::spd_sqrt_log(x, linalg::SpdFn::inv_sqrt);
    Tensor mid = sym_part(matmul(matmul(inv_sqrt_x, y), inv_sqrt_x));
    return frobenius_norm(linalg::spd_sqrt_log(mid, linalg::SpdFn::log));
}

double membership_residual(const ManifoldDescriptor& d, const Tensor& t) {
    if (t.shape() != d.value_shape()) {
        throw ShapeMismatch("membership_residual: expected shape " +
                            shape_to_string(d.value_shape()) + ", got " +
                            shape_to_string(t.shape()));
    }
    switch (d.kind) {
        case Kind::euclidean:
            return 0.0;
        case Kind::stiefel: {
            Tensor x = canon(d, t);
            return frobenius_norm(sub(matmul(x, x, true, false), Tensor::identity(d.p)));
        }
        case Kind::positive_definite: {
            double r = frobenius_norm(sub(t, transpose(t)));
            linalg::SymEigResult eig = linalg::sym_eig(sym_part(t));
            r += std::max(0.0, -eig.eigenvalues[0]);
            return r;
        }
    }
    return 0.0;
}

} // namespace rdl::manifold
