#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace pdiff::kernels {

// Data-parallel inner loops of the trainer. Two implementations share this
// table: a scalar reference and an AVX2+FMA variant compiled in its own
// translation unit. The active table is chosen at runtime from CPU features
// and can be forced (config key `kernel`) for equivalence testing.
//
// Conventions: all matrices row-major. `s` = batch rows, `d` = input width,
// `o` = output width. dense weights are o x d (one row per output unit).
struct Ops {
    // y[s,o] = dot(x[s,:], w[o,:]) + b[o]
    void (*dense_forward)(const double* x, const double* w, const double* b, double* y,
                          std::size_t s, std::size_t d, std::size_t o);
    // dx[s,:] = sum_o dy[s,o] * w[o,:]   (dx overwritten)
    void (*dense_backward_data)(const double* dy, const double* w, double* dx, std::size_t s,
                                std::size_t d, std::size_t o);
    // dw[o,:] = sum_s dy[s,o] * x[s,:]   (dw overwritten; accumulation over s in ascending order)
    void (*dense_backward_weights)(const double* dy, const double* x, double* dw, std::size_t s,
                                   std::size_t d, std::size_t o);
    // db[o] = sum_s dy[s,o]
    void (*bias_backward)(const double* dy, double* db, std::size_t s, std::size_t o);
    // z[i] = max(z[i], 0), in place
    void (*relu_forward)(double* z, std::size_t n);
    // da[i] = a[i] > 0 ? da[i] : 0, in place (a = forward activations)
    void (*relu_backward)(const double* a, double* da, std::size_t n);
    // v[i] = mu*v[i] + g[i]; w[i] = w[i] - lr*v[i]
    void (*sgd_momentum)(double* w, double* v, const double* g, double lr, double mu,
                         std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

enum class Variant { scalar, avx2 };

const char* variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& name);  // "scalar" | "avx2"

const Ops& scalar_ops();
bool avx2_available();  // compiled in and supported by this CPU

// Selection. select() throws a config error if the variant is unavailable.
// select_auto() picks the best available and is the default.
void select(Variant v);
void select_auto();
Variant active();
const Ops& ops();

}  // namespace pdiff::kernels
