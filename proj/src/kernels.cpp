#include "pdiff/kernels.hpp"

#include "pdiff/error.hpp"

namespace pdiff::kernels {

#ifdef PDIFF_HAVE_AVX2
const Ops& avx2_ops();  // defined in kernels_avx2.cpp
#endif

namespace {

Variant g_active = [] {
#ifdef PDIFF_HAVE_AVX2
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Variant::avx2;
#endif
    return Variant::scalar;
}();

}  // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::scalar: return "scalar";
        case Variant::avx2: return "avx2";
    }
    return "?";
}

std::optional<Variant> parse_variant(const std::string& name) {
    if (name == "scalar") return Variant::scalar;
    if (name == "avx2") return Variant::avx2;
    return std::nullopt;
}

bool avx2_available() {
#ifdef PDIFF_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select(Variant v) {
    if (v == Variant::avx2 && !avx2_available())
        fail(ErrorCategory::config, "kernel variant 'avx2' is not available on this CPU/build");
    g_active = v;
}

void select_auto() { g_active = avx2_available() ? Variant::avx2 : Variant::scalar; }

Variant active() { return g_active; }

const Ops& ops() {
#ifdef PDIFF_HAVE_AVX2
    if (g_active == Variant::avx2) return avx2_ops();
#endif
    return scalar_ops();
}

}  // namespace pdiff::kernels
