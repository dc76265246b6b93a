// Scalar reference kernels. Every SIMD variant is equivalence-tested against
// these; keep them boring and obviously correct.

#include <cmath>
#include <cstring>

#include "pdiff/kernels.hpp"

namespace pdiff::kernels {
namespace {

void dense_forward_scalar(const double* x, const double* w, const double* b, double* y,
                          std::size_t s, std::size_t d, std::size_t o) {
    for (std::size_t i = 0; i < s; ++i) {
        const double* xi = x + i * d;
        double* yi = y + i * o;
        for (std::size_t j = 0; j < o; ++j) {
            const double* wj = w + j * d;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += xi[k] * wj[k];
            yi[j] = acc + b[j];
        }
    }
}

void dense_backward_data_scalar(const double* dy, const double* w, double* dx, std::size_t s,
                                std::size_t d, std::size_t o) {
    std::memset(dx, 0, s * d * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        double* dxi = dx + i * d;
        for (std::size_t j = 0; j < o; ++j) {
            const double a = dyi[j];
            const double* wj = w + j * d;
            for (std::size_t k = 0; k < d; ++k) dxi[k] = std::fma(a, wj[k], dxi[k]);
        }
    }
}

void dense_backward_weights_scalar(const double* dy, const double* x, double* dw, std::size_t s,
                                   std::size_t d, std::size_t o) {
    std::memset(dw, 0, o * d * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        const double* xi = x + i * d;
        for (std::size_t j = 0; j < o; ++j) {
            const double a = dyi[j];
            double* dwj = dw + j * d;
            for (std::size_t k = 0; k < d; ++k) dwj[k] = std::fma(a, xi[k], dwj[k]);
        }
    }
}

void bias_backward_scalar(const double* dy, double* db, std::size_t s, std::size_t o) {
    std::memset(db, 0, o * sizeof(double));
    for (std::size_t i = 0; i < s; ++i) {
        const double* dyi = dy + i * o;
        for (std::size_t j = 0; j < o; ++j) db[j] += dyi[j];
    }
}

void relu_forward_scalar(double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward_scalar(const double* a, double* da, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(a[i] > 0.0)) da[i] = 0.0;
}

void sgd_momentum_scalar(double* w, double* v, const double* g, double lr, double mu,
                         std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::fma(mu, v[i], g[i]);
        w[i] = std::fma(-lr, v[i], w[i]);
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        dense_forward_scalar,  dense_backward_data_scalar, dense_backward_weights_scalar,
        bias_backward_scalar,  relu_forward_scalar,        relu_backward_scalar,
        sgd_momentum_scalar,   dot_scalar,                 axpy_scalar,
    };
    return table;
}

}  // namespace pdiff::kernels
