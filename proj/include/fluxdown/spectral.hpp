/// @file spectral.hpp
/// @brief Radially averaged power spectra, log-log slope fits and the
///        spectral-slope difference loss.
///
/// Radial wavenumbers are measured in cycles per length of the shorter grid
/// axis: a coefficient (ky, kx) sits at k = min(H, W) * sqrt((ky/H)^2 + (kx/W)^2),
/// so annuli are circles in physical wavenumber on non-square grids. Bins are
/// unit-wide and centred on integers; the DC coefficient is never binned.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/fft.hpp"
#include "fluxdown/grid.hpp"

namespace fluxdown {

inline constexpr std::size_t min_spectrum_size = 8;

/// Non-DC power at or below this fraction of the peak power counts as zero.
inline constexpr double spectral_power_floor = 1e-24;

enum class Window { none, hann };

/// |DFT|^2 on the full frequency grid, in FFT order (index ky * width + kx).
struct PowerSpectrum2D {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> power;

    double operator()(std::size_t ky, std::size_t kx) const { return power[ky * width + kx]; }
};

struct SpectrumProfile {
    std::vector<double> k_bins;
    std::vector<double> psi;
    std::vector<std::size_t> counts;
    double power_floor = 0.0;
    bool fitted = false;
    double alpha = 0.0;
    double intercept = 0.0;
    std::size_t fit_lo = 0;
    std::size_t fit_hi = 0;
};

/// Inclusive bin-index range used by the slope fit.
struct FitRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

struct SlopeFit {
    double alpha = 0.0;
    double intercept = 0.0;
};

struct SpectralOptions {
    std::optional<FitRange> fit;
    Window window = Window::none;
};

inline double radial_wavenumber(std::size_t ky, std::size_t kx, std::size_t height, std::size_t width) {
    const double fy = static_cast<double>(detail::signed_frequency(ky, height)) / static_cast<double>(height);
    const double fx = static_cast<double>(detail::signed_frequency(kx, width)) / static_cast<double>(width);
    return static_cast<double>(std::min(height, width)) * std::sqrt(fy * fy + fx * fx);
}

inline PowerSpectrum2D power_spectrum_2d(const Grid2D& t, Window window = Window::none) {
    if (t.height() < min_spectrum_size || t.width() < min_spectrum_size) {
        throw Error(ErrorKind::too_small, "power spectrum needs at least 8x8 samples, got " + shape_string(t));
    }
    const std::size_t h = t.height();
    const std::size_t w = t.width();
    std::vector<double> wy(h, 1.0);
    std::vector<double> wx(w, 1.0);
    if (window == Window::hann) {
        const double two_pi = 2.0 * std::numbers::pi;
        for (std::size_t i = 0; i < h; ++i) wy[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / h));
        for (std::size_t j = 0; j < w; ++j) wx[j] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(j) / w));
    }
    std::vector<std::complex<double>> buf(h * w);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            buf[i * w + j] = t(i, j) * wy[i] * wx[j];
        }
    }
    detail::fft2d(buf, h, w, detail::FftDirection::forward);
    PowerSpectrum2D psd{h, w, std::vector<double>(h * w)};
    for (std::size_t k = 0; k < buf.size(); ++k) {
        psd.power[k] = std::norm(buf[k]);
    }
    return psd;
}

inline SpectrumProfile radial_profile(const std::vector<double>& psd, std::size_t height, std::size_t width) {
    if (psd.size() != height * width) {
        throw Error(ErrorKind::dimension_mismatch, "power array of size " + std::to_string(psd.size()) +
                                                       " does not match " + std::to_string(height) + "x" +
                                                       std::to_string(width));
    }
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    double peak = 0.0;
    for (std::size_t ky = 0; ky < height; ++ky) {
        for (std::size_t kx = 0; kx < width; ++kx) {
            const double p = psd[ky * width + kx];
            peak = std::max(peak, p);
            if (ky == 0 && kx == 0) {
                continue;
            }
            const double k = radial_wavenumber(ky, kx, height, width);
            const auto bin = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(k + 0.5)));
            if (bin >= sums.size()) {
                sums.resize(bin + 1, 0.0);
                counts.resize(bin + 1, 0);
            }
            sums[bin] += p;
            ++counts[bin];
        }
    }
    SpectrumProfile prof;
    prof.power_floor = peak * spectral_power_floor;
    for (std::size_t b = 1; b < sums.size(); ++b) {
        if (counts[b] == 0) {
            continue;
        }
        prof.k_bins.push_back(static_cast<double>(b));
        prof.psi.push_back(sums[b] / static_cast<double>(counts[b]));
        prof.counts.push_back(counts[b]);
    }
    return prof;
}

inline SpectrumProfile radial_profile(const PowerSpectrum2D& psd) {
    return radial_profile(psd.power, psd.height, psd.width);
}

/// Bins with k in [k_min, k_max].
inline FitRange fit_range_for_k(const SpectrumProfile& prof, double k_min, double k_max) {
    std::optional<std::size_t> lo;
    std::size_t hi = 0;
    for (std::size_t b = 0; b < prof.k_bins.size(); ++b) {
        if (prof.k_bins[b] >= k_min && prof.k_bins[b] <= k_max) {
            if (!lo) lo = b;
            hi = b;
        }
    }
    if (!lo || hi - *lo < 3) {
        throw Error(ErrorKind::degenerate, "fewer than 4 spectral bins with k in [" + std::to_string(k_min) +
                                               ", " + std::to_string(k_max) + "]");
    }
    return {*lo, hi};
}

/// Default inertial range: k from 4 up to half the Nyquist of the shorter axis.
inline FitRange default_fit_range(const SpectrumProfile& prof, std::size_t height, std::size_t width) {
    return fit_range_for_k(prof, 4.0, 0.25 * static_cast<double>(std::min(height, width)));
}

inline SlopeFit fit_slope(const SpectrumProfile& prof, std::size_t fit_lo, std::size_t fit_hi) {
    if (fit_hi < fit_lo || fit_hi - fit_lo < 3) {
        throw Error(ErrorKind::invalid_argument, "slope fit needs at least 4 bins, got range [" +
                                                     std::to_string(fit_lo) + ", " + std::to_string(fit_hi) + "]");
    }
    if (fit_hi >= prof.psi.size()) {
        throw Error(ErrorKind::invalid_argument, "fit range end " + std::to_string(fit_hi) +
                                                     " beyond the " + std::to_string(prof.psi.size()) + " bins");
    }
    const std::size_t n = fit_hi - fit_lo + 1;
    double sx = 0.0;
    double sy = 0.0;
    std::vector<double> xs(n);
    std::vector<double> ys(n);
    for (std::size_t b = fit_lo; b <= fit_hi; ++b) {
        if (!(prof.psi[b] > prof.power_floor) || !(prof.k_bins[b] > 0.0)) {
            throw Error(ErrorKind::degenerate, "zero spectral power in bin " + std::to_string(b) + " (k = " +
                                                   std::to_string(prof.k_bins[b]) + "); log spectrum undefined");
        }
        xs[b - fit_lo] = std::log10(prof.k_bins[b]);
        ys[b - fit_lo] = std::log10(prof.psi[b]);
        sx += xs[b - fit_lo];
        sy += ys[b - fit_lo];
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        sxx += (xs[m] - mx) * (xs[m] - mx);
        sxy += (xs[m] - mx) * (ys[m] - my);
    }
    const double alpha = sxy / sxx;
    return {alpha, my - alpha * mx};
}

/// Profile with the slope fitted over `opts.fit` or the default inertial range.
inline SpectrumProfile ralsd(const Grid2D& t, const SpectralOptions& opts = {}) {
    SpectrumProfile prof = radial_profile(power_spectrum_2d(t, opts.window));
    const FitRange range = opts.fit ? *opts.fit : default_fit_range(prof, t.height(), t.width());
    const SlopeFit fit = fit_slope(prof, range.lo, range.hi);
    prof.fitted = true;
    prof.alpha = fit.alpha;
    prof.intercept = fit.intercept;
    prof.fit_lo = range.lo;
    prof.fit_hi = range.hi;
    return prof;
}

/// |alpha_pred - alpha_ref| with the same fit range on both grids.
inline double spectral_loss(const Grid2D& pred, const Grid2D& ref, const SpectralOptions& opts = {}) {
    auto fitted = [&](const Grid2D& g, const char* label) {
        try {
            return ralsd(g, opts).alpha;
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(label) + " grid: " + e.what());
        }
    };
    return std::abs(fitted(pred, "pred") - fitted(ref, "ref"));
}

}  // namespace fluxdown
