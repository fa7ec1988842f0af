#include "slr/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace slr {

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& r : init) {
        if (r.size() != cols)
            throw std::invalid_argument("Tensor2: ragged initializer");
        data.insert(data.end(), r.begin(), r.end());
    }
}

Tensor2 Tensor2::row(std::initializer_list<double> v) {
    Tensor2 t(1, v.size());
    t.data.assign(v.begin(), v.end());
    return t;
}

std::string Tensor2::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Tensor2::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor2::fill(double v) {
    for (double& d : data) d = v;
}

void Tensor2::add_scaled(const Tensor2& o, double s) {
    if (!same_shape(o))
        throw std::invalid_argument("add_scaled: shape mismatch " + shape_str() + " vs " + o.shape_str());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
}

double Tensor2::frobenius_norm() const {
    double s = 0;
    for (double v : data) s += v * v;
    return std::sqrt(s);
}

Tensor2 Tensor2::row_at(std::size_t i) const {
    Tensor2 r(1, cols);
    for (std::size_t j = 0; j < cols; ++j) r.data[j] = at(i, j);
    return r;
}

void require_shape(const Tensor2& t, std::size_t r, std::size_t c, const char* what) {
    if (t.rows != r || t.cols != c)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(r) + "x" +
                                    std::to_string(c) + ", got " + t.shape_str());
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dims disagree " + a.shape_str() + " vs " + b.shape_str());
    Tensor2 y(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double av = a.at(i, k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                y.at(i, j) += av * b.at(k, j);
        }
    return y;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 y(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            y.at(j, i) = a.at(i, j);
    return y;
}

double dot(const Tensor2& a, const Tensor2& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: size mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

Tensor2 affine_forward(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
    if (x.cols != w.rows)
        throw std::invalid_argument("affine: x " + x.shape_str() + " incompatible with w " + w.shape_str());
    if (b.rows != 1 || b.cols != w.cols)
        throw std::invalid_argument("affine: bias " + b.shape_str() + " incompatible with w " + w.shape_str());
    Tensor2 y = matmul(x, w);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j)
            y.at(i, j) += b.at(0, j);
    return y;
}

void affine_backward(const Tensor2& x, const Tensor2& w, const Tensor2& dy,
                     Tensor2* dx, Tensor2* dw, Tensor2* db) {
    if (dy.rows != x.rows || dy.cols != w.cols)
        throw std::invalid_argument("affine_backward: dy " + dy.shape_str() + " inconsistent");
    if (dx) dx->add_scaled(matmul(dy, transpose(w)), 1.0);
    if (dw) dw->add_scaled(matmul(transpose(x), dy), 1.0);
    if (db) {
        for (std::size_t i = 0; i < dy.rows; ++i)
            for (std::size_t j = 0; j < dy.cols; ++j)
                db->at(0, j) += dy.at(i, j);
    }
}

Tensor2 l2_normalize(const Tensor2& v, bool* degenerate) {
    double n = v.frobenius_norm();
    if (degenerate) *degenerate = (n == 0.0);
    if (n == 0.0) return v;
    Tensor2 out = v;
    for (double& d : out.data) d /= n;
    return out;
}

void l2_normalize_backward(const Tensor2& v, const Tensor2& dy, Tensor2& dv) {
    double n = v.frobenius_norm();
    if (n == 0.0) return;
    // d/dv (v/|v|) = I/|v| - v v^T / |v|^3
    double vdy = dot(v, dy);
    double n3 = n * n * n;
    for (std::size_t i = 0; i < v.data.size(); ++i)
        dv.data[i] += dy.data[i] / n - v.data[i] * vdy / n3;
}

Tensor2 softmax(const Tensor2& v) {
    Tensor2 y(v.rows, v.cols);
    for (std::size_t i = 0; i < v.rows; ++i) {
        double mx = v.at(i, 0);
        for (std::size_t j = 1; j < v.cols; ++j) mx = std::max(mx, v.at(i, j));
        double sum = 0;
        for (std::size_t j = 0; j < v.cols; ++j) {
            double e = std::exp(v.at(i, j) - mx);
            y.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < v.cols; ++j) y.at(i, j) /= sum;
    }
    return y;
}

void softmax_backward(const Tensor2& y, const Tensor2& dy, Tensor2& dv) {
    for (std::size_t i = 0; i < y.rows; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < y.cols; ++j) s += dy.at(i, j) * y.at(i, j);
        for (std::size_t j = 0; j < y.cols; ++j)
            dv.at(i, j) += y.at(i, j) * (dy.at(i, j) - s);
    }
}

Tensor2 relu(const Tensor2& x) {
    Tensor2 y = x;
    for (double& v : y.data)
        if (v < 0) v = 0;
    return y;
}

void relu_backward(const Tensor2& x, const Tensor2& dy, Tensor2& dx) {
    for (std::size_t i = 0; i < x.data.size(); ++i)
        if (x.data[i] > 0) dx.data[i] += dy.data[i];
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace slr
