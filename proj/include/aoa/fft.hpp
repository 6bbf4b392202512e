#pragma once

#include <cstring>
#include <map>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "aoa/common.hpp"

namespace aoa::fft {

namespace detail {

// FFTW planning is not thread safe; executing distinct plans is. Plans and
// their work buffers are cached per thread, creation/destruction serialized.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct Plan {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    std::size_t n = 0;

    explicit Plan(std::size_t size) : n(size) {
        std::lock_guard lock(planner_mutex());
        in = fftw_alloc_complex(n);
        out = fftw_alloc_complex(n);
        // FFTW_ESTIMATE: deterministic plan choice, so repeated runs are
        // bit-identical (FFTW_MEASURE picks algorithms by runtime timing).
        fwd = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
        fftw_free(in);
        fftw_free(out);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
};

inline Plan& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, Plan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.try_emplace(n, n).first;
    return it->second;
}

inline void execute(std::span<const cd> in, std::span<cd> out, bool inverse) {
    if (in.size() != out.size()) throw DimensionError("fft: in/out size mismatch");
    Plan& p = plan_for(in.size());
    std::memcpy(p.in, in.data(), in.size() * sizeof(cd));
    fftw_execute(inverse ? p.bwd : p.fwd);
    // std::complex<double> is layout-compatible with fftw_complex
    std::memcpy(static_cast<void*>(out.data()), p.out, in.size() * sizeof(cd));
}

}  // namespace detail

/// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
inline void forward(std::span<const cd> in, std::span<cd> out) {
    detail::execute(in, out, false);
}

/// Unnormalized inverse DFT, x[n] = sum_k X[k] exp(+j 2 pi k n / N).
inline void inverse(std::span<const cd> in, std::span<cd> out) {
    detail::execute(in, out, true);
}

inline std::vector<cd> forward(const std::vector<cd>& in) {
    std::vector<cd> out(in.size());
    forward(std::span<const cd>(in), std::span<cd>(out));
    return out;
}

inline std::vector<cd> inverse(const std::vector<cd>& in) {
    std::vector<cd> out(in.size());
    inverse(std::span<const cd>(in), std::span<cd>(out));
    return out;
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace aoa::fft
