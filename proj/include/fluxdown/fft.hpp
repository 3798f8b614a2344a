/// @file fft.hpp
/// @brief Thin RAII wrapper over FFTW for in-place 2-D complex transforms.
#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

namespace fluxdown::detail {

// FFTW's planner is not re-entrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

enum class FftDirection { forward, inverse };

/// Unnormalised in-place 2-D DFT of a row-major height x width array.
inline void fft2d(std::vector<std::complex<double>>& data, std::size_t height, std::size_t width,
                  FftDirection dir) {
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    const int sign = dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = nullptr;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buf, buf, sign,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

/// Signed frequency index of DFT bin k on an axis of length n.
inline long signed_frequency(std::size_t k, std::size_t n) {
    return 2 * k < n ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

}  // namespace fluxdown::detail
