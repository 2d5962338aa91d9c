#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rdl/errors.hpp"
#include "rdl/rng.hpp"

namespace rdl {

// Dense row-major tensor of doubles. Shapes have rank >= 1 and every
// dimension >= 1; scalars are shape {1}. A default-constructed Tensor is
// "unset" (rank 0, no data) and is only used as a not-yet-assigned marker.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor identity(int n);
    static Tensor gaussian(std::vector<int> shape, Rng& rng);
    static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng);

    bool defined() const { return !shape_.empty(); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int size() const { return static_cast<int>(data_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

    // Rank-2 helpers; throw ShapeMismatch on other ranks.
    int rows() const;
    int cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& buffer() { return data_; }
    const std::vector<double>& buffer() const { return data_; }

    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }

    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

    // Rank-3 access (b, i, j).
    double operator()(int b, int i, int j) const;
    double& operator()(int b, int i, int j);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
    int cols_ = 0; // last dimension, cached for rank-2/3 indexing
};

int shape_product(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Elementwise arithmetic. Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double c);
// a + c * b
Tensor axpy(const Tensor& a, double c, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Rank-2 only.
Tensor transpose(const Tensor& m);
double trace(const Tensor& m);
Tensor sym_part(const Tensor& m); // (M + M^T) / 2

// C = op(A) * op(B) with optional logical transposes, rank-2 operands.
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);
// Batched form: a is (m x k), b is (batch x k x n), result (batch x m x n).
Tensor matmul_batched(const Tensor& a, const Tensor& b);

Tensor reshaped(const Tensor& t, std::vector<int> shape);

// Text format: first line "shape: d1 d2 ... dk", then the values row-major
// with 17 significant digits, one row of the last dimension per line.
void write_tensor_text(std::ostream& os, const Tensor& t);
Tensor read_tensor_text(std::istream& is);

std::string format_double(double v); // %.17g

} // namespace rdl
