#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace slr {

// Dense row-major matrix of doubles. Row vectors are 1xN tensors.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor2(std::initializer_list<std::initializer_list<double>> init);

    static Tensor2 zeros(std::size_t r, std::size_t c) { return Tensor2(r, c); }
    static Tensor2 row(std::initializer_list<double> v);

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const;

    bool all_finite() const;
    void fill(double v);
    void add_scaled(const Tensor2& o, double s);  // *this += s * o
    double frobenius_norm() const;

    Tensor2 row_at(std::size_t i) const;  // copy of row i as 1xC
};

void require_shape(const Tensor2& t, std::size_t r, std::size_t c, const char* what);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
double dot(const Tensor2& a, const Tensor2& b);  // flattened inner product, shapes must match

// y = x*w + b, b broadcast over rows of x.
Tensor2 affine_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b);
// Accumulates into dx/dw/db (any may be null).
void affine_backward(const Tensor2& x, const Tensor2& w, const Tensor2& dy,
                     Tensor2* dx, Tensor2* dw, Tensor2* db);

// Row-vector L2 normalization. A zero input maps to zero and sets *degenerate.
Tensor2 l2_normalize(const Tensor2& v, bool* degenerate = nullptr);
// Accumulates d(normalize(v))/dv^T * dy into dv. No-op for degenerate inputs.
void l2_normalize_backward(const Tensor2& v, const Tensor2& dy, Tensor2& dv);

// Numerically stable row softmax (applied independently to each row).
Tensor2 softmax(const Tensor2& v);
// y is the softmax output; accumulates into dv.
void softmax_backward(const Tensor2& y, const Tensor2& dy, Tensor2& dv);

Tensor2 relu(const Tensor2& x);
void relu_backward(const Tensor2& x, const Tensor2& dy, Tensor2& dx);

double sigmoid(double x);

}  // namespace slr
