#include "rdl/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace rdl {

namespace {

void check_shape_valid(const std::vector<int>& shape) {
    if (shape.empty()) {
        throw ShapeMismatch("tensor shape must have rank >= 1 (scalars are shape [1])");
    }
    for (int d : shape) {
        if (d < 1) {
            throw ShapeMismatch("tensor dimensions must be >= 1, got " + shape_to_string(shape));
        }
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(op) + ": shape " + shape_to_string(a.shape()) +
                            " vs " + shape_to_string(b.shape()));
    }
}

} // namespace

int shape_product(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) n *= d;
    return static_cast<int>(n);
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    s += "]";
    return s;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
    cols_ = shape_.back();
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape_valid(shape_);
    if (static_cast<int>(data_.size()) != shape_product(shape_)) {
        throw ShapeMismatch("data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_to_string(shape_));
    }
    cols_ = shape_.back();
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::gaussian(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.gaussian();
    return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) throw ShapeMismatch("rows(): tensor is not rank 2: " + shape_to_string(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw ShapeMismatch("cols(): tensor is not rank 2: " + shape_to_string(shape_));
    return shape_[1];
}

double Tensor::operator()(int b, int i, int j) const {
    return data_[static_cast<std::size_t>((b * shape_[1] + i) * cols_ + j)];
}

double& Tensor::operator()(int b, int i, int j) {
    return data_[static_cast<std::size_t>((b * shape_[1] + i) * cols_ + j)];
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (int i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (int i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor scaled(const Tensor& a, double c) {
    Tensor out = a;
    for (int i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

Tensor axpy(const Tensor& a, double c, const Tensor& b) {
    check_same_shape(a, b, "axpy");
    Tensor out = a;
    for (int i = 0; i < out.size(); ++i) out[i] += c * b[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (int i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double frobenius_norm(const Tensor& a) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

Tensor transpose(const Tensor& m) {
    const int r = m.rows(), c = m.cols();
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out(j, i) = m(i, j);
    return out;
}

double trace(const Tensor& m) {
    const int r = m.rows(), c = m.cols();
    if (r != c) throw ShapeMismatch("trace: matrix is not square: " + shape_to_string(m.shape()));
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += m(i, i);
    return s;
}

Tensor sym_part(const Tensor& m) {
    const int r = m.rows(), c = m.cols();
    if (r != c) throw ShapeMismatch("sym_part: matrix is not square: " + shape_to_string(m.shape()));
    Tensor out({r, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) out(i, j) = 0.5 * (m(i, j) + m(j, i));
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeMismatch("matmul: operands must be rank 2, got " + shape_to_string(a.shape()) +
                            " and " + shape_to_string(b.shape()));
    }
    const int m = ta ? a.cols() : a.rows();
    const int ka = ta ? a.rows() : a.cols();
    const int kb = tb ? b.cols() : b.rows();
    const int n = tb ? b.rows() : b.cols();
    if (ka != kb) {
        throw ShapeMismatch("matmul: inner dimensions " + std::to_string(ka) + " vs " +
                            std::to_string(kb));
    }
    Tensor out({m, n});
    // ikj order over the logical (non-transposed) layout of each operand.
    if (!ta && !tb) {
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < ka; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < n; ++j) out(i, j) += aik * b(k, j);
            }
    } else if (!ta && tb) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int k = 0; k < ka; ++k) s += a(i, k) * b(j, k);
                out(i, j) = s;
            }
    } else if (ta && !tb) {
        for (int k = 0; k < ka; ++k)
            for (int i = 0; i < m; ++i) {
                const double aki = a(k, i);
                if (aki == 0.0) continue;
                for (int j = 0; j < n; ++j) out(i, j) += aki * b(k, j);
            }
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int k = 0; k < ka; ++k) s += a(k, i) * b(j, k);
                out(i, j) = s;
            }
    }
    return out;
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 3) {
        throw ShapeMismatch("matmul_batched: expected rank-2 lhs and rank-3 rhs, got " +
                            shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
    }
    const int m = a.rows(), k = a.cols();
    const int batch = b.dim(0);
    if (b.dim(1) != k) {
        throw ShapeMismatch("matmul_batched: inner dimensions " + std::to_string(k) + " vs " +
                            std::to_string(b.dim(1)));
    }
    const int n = b.dim(2);
    Tensor out({batch, m, n});
    for (int bt = 0; bt < batch; ++bt)
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk) {
                const double aik = a(i, kk);
                if (aik == 0.0) continue;
                for (int j = 0; j < n; ++j) out(bt, i, j) += aik * b(bt, kk, j);
            }
    return out;
}

Tensor reshaped(const Tensor& t, std::vector<int> shape) {
    check_shape_valid(shape);
    if (shape_product(shape) != t.size()) {
        throw ShapeMismatch("reshape: " + shape_to_string(t.shape()) + " -> " +
                            shape_to_string(shape) + " changes element count");
    }
    return Tensor(std::move(shape), t.buffer());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

void write_tensor_text(std::ostream& os, const Tensor& t) {
    os << "shape:";
    for (int d : t.shape()) os << ' ' << d;
    os << '\n';
    const int row = t.shape().back();
    for (int i = 0; i < t.size(); i += row) {
        for (int j = 0; j < row; ++j) {
            if (j) os << ' ';
            os << format_double(t[i + j]);
        }
        os << '\n';
    }
}

Tensor read_tensor_text(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("tensor text: missing shape line");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "shape:") throw ParseError("tensor text: expected 'shape:' line, got '" + line + "'");
    std::vector<int> shape;
    int d;
    while (header >> d) shape.push_back(d);
    if (shape.empty()) throw ParseError("tensor text: empty shape");
    const int n = shape_product(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (!(is >> data[static_cast<std::size_t>(i)])) {
            throw ParseError("tensor text: expected " + std::to_string(n) + " values, got " +
                             std::to_string(i));
        }
    }
    is.ignore(); // trailing newline
    return Tensor(std::move(shape), std::move(data));
}

} // namespace rdl
