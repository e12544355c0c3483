#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vastvocab {

// Dense row-major matrix of doubles. The one value type everything in this
// library computes on; gradient bookkeeping lives in tape.hpp.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const DenseMatrix& o) const {
        return rows == o.rows && cols == o.cols;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// c = a * b. The ikj ordering keeps the inner loop contiguous in both b and c.
inline DenseMatrix matmul_plain(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ, " +
                                  a.shape_str() + " * " + b.shape_str());
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline DenseMatrix transpose_plain(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline DenseMatrix add_plain(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.same_shape(b), "add: shape mismatch, " + a.shape_str() + " vs " +
                                 b.shape_str());
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

// Row-stable softmax: max is subtracted per row before exponentiation.
inline DenseMatrix softmax_rows_plain(const DenseMatrix& m) {
    DenseMatrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* src = m.row(i);
        double* dst = out.row(i);
        double mx = src[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, src[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] /= sum;
    }
    return out;
}

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise layer norm with affine parameters gamma/beta (1 x cols each).
// Also hands back the normalized rows and inverse std devs for the backward
// pass. Rejects single-column input: its variance is identically zero.
struct LayerNormForward {
    DenseMatrix out;
    DenseMatrix normalized;        // x_hat, before the affine
    std::vector<double> inv_std;   // per row, 1/sqrt(var + eps)
};

inline LayerNormForward layer_norm_plain(const DenseMatrix& x,
                                         const DenseMatrix& gamma,
                                         const DenseMatrix& beta) {
    require(x.cols >= 2, "layer_norm: needs >= 2 columns, got " + x.shape_str());
    require(gamma.rows == 1 && gamma.cols == x.cols,
            "layer_norm: gamma must be 1x" + std::to_string(x.cols));
    require(beta.rows == 1 && beta.cols == x.cols,
            "layer_norm: beta must be 1x" + std::to_string(x.cols));
    LayerNormForward f;
    f.out = DenseMatrix(x.rows, x.cols);
    f.normalized = DenseMatrix(x.rows, x.cols);
    f.inv_std.resize(x.rows);
    const double n = static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* src = x.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += src[j];
        mean /= n;
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = src[j] - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        f.inv_std[i] = inv;
        double* xh = f.normalized.row(i);
        double* o = f.out.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) {
            xh[j] = (src[j] - mean) * inv;
            o[j] = gamma.data[j] * xh[j] + beta.data[j];
        }
    }
    return f;
}

// tanh-form GELU; smooth everywhere, which keeps finite-difference probes
// clean at arbitrary points.
inline double gelu_scalar(double x) {
    const double c = 0.7978845608028654;  // sqrt(2/pi)
    const double u = c * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad_scalar(double x) {
    const double c = 0.7978845608028654;
    const double u = c * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

inline DenseMatrix gelu_plain(const DenseMatrix& m) {
    DenseMatrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = gelu_scalar(m.data[i]);
    return out;
}

}  // namespace vastvocab
