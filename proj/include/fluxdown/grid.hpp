/// @file grid.hpp
/// @brief Uniform 2-D scalar grid and the resolution-changing operators.
///
/// Samples are cell-centred: value (i, j) sits at x = (j + 0.5) dx,
/// y = (i + 0.5) dy. Row index i runs along y, column index j along x.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fluxdown/error.hpp"

namespace fluxdown {

class Grid2D {
public:
    Grid2D() = default;

    Grid2D(std::size_t height, std::size_t width, double dx = 1.0, double dy = 1.0)
        : Grid2D(height, width, dx, dy, std::vector<double>(height * width, 0.0)) {}

    Grid2D(std::size_t height, std::size_t width, double dx, double dy, std::vector<double> values)
        : height_(height), width_(width), dx_(dx), dy_(dy), values_(std::move(values)) {
        if (height_ == 0 || width_ == 0) {
            throw Error(ErrorKind::invalid_argument, "grid dimensions must be positive, got " +
                                                         std::to_string(height_) + "x" +
                                                         std::to_string(width_));
        }
        if (!(dx_ > 0.0) || !(dy_ > 0.0) || !std::isfinite(dx_) || !std::isfinite(dy_)) {
            throw Error(ErrorKind::invalid_argument, "grid spacings must be positive and finite");
        }
        if (values_.size() != height_ * width_) {
            throw Error(ErrorKind::dimension_mismatch,
                        "value count " + std::to_string(values_.size()) + " does not match " +
                            std::to_string(height_) + "x" + std::to_string(width_));
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }
    double dx() const noexcept { return dx_; }
    double dy() const noexcept { return dy_; }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * width_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * width_ + j]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const Grid2D& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double mean() const noexcept {
        return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(size());
    }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    double dx_ = 1.0;
    double dy_ = 1.0;
    std::vector<double> values_;
};

inline std::string shape_string(const Grid2D& g) {
    return std::to_string(g.height()) + "x" + std::to_string(g.width());
}

inline void require_same_shape(const Grid2D& a, const Grid2D& b, const char* what) {
    if (a.height() != b.height()) {
        throw Error(ErrorKind::dimension_mismatch, std::string(what) + ": height (y axis) " +
                                                       std::to_string(a.height()) + " vs " +
                                                       std::to_string(b.height()));
    }
    if (a.width() != b.width()) {
        throw Error(ErrorKind::dimension_mismatch, std::string(what) + ": width (x axis) " +
                                                       std::to_string(a.width()) + " vs " +
                                                       std::to_string(b.width()));
    }
}

/// Coarse/fine pair describing the same physical extent.
struct GridPair {
    Grid2D coarse;
    Grid2D fine;
    std::size_t scale_y = 1;
    std::size_t scale_x = 1;
};

inline Grid2D coarsen_block_mean(const Grid2D& fine, std::size_t scale_y, std::size_t scale_x) {
    if (scale_y == 0 || scale_x == 0) {
        throw Error(ErrorKind::invalid_argument, "coarsening scales must be positive");
    }
    if (fine.height() % scale_y != 0) {
        throw Error(ErrorKind::dimension_mismatch,
                    "height " + std::to_string(fine.height()) + " is not divisible by scale_y " +
                        std::to_string(scale_y));
    }
    if (fine.width() % scale_x != 0) {
        throw Error(ErrorKind::dimension_mismatch,
                    "width " + std::to_string(fine.width()) + " is not divisible by scale_x " +
                        std::to_string(scale_x));
    }
    const std::size_t h = fine.height() / scale_y;
    const std::size_t w = fine.width() / scale_x;
    Grid2D out(h, w, fine.dx() * static_cast<double>(scale_x), fine.dy() * static_cast<double>(scale_y));
    const double inv = 1.0 / static_cast<double>(scale_y * scale_x);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double sum = 0.0;
            for (std::size_t a = 0; a < scale_y; ++a) {
                for (std::size_t b = 0; b < scale_x; ++b) {
                    sum += fine(i * scale_y + a, j * scale_x + b);
                }
            }
            out(i, j) = sum * inv;
        }
    }
    return out;
}

namespace detail {

/// Interpolation stencil for one fine sample along one axis.
struct Stencil1D {
    std::size_t first = 0;  // index of the first coarse sample used
    std::size_t count = 1;
    std::array<double, 3> weight{1.0, 0.0, 0.0};
};

/// Three-point Lagrange stencils (two-point on length-2 axes) for each fine
/// cell centre, using the nearest coarse centres and clamping at the edges.
inline std::vector<Stencil1D> quadratic_stencils(std::size_t n_coarse, std::size_t scale) {
    std::vector<Stencil1D> out(n_coarse * scale);
    const double s = static_cast<double>(scale);
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double u = (static_cast<double>(p) + 0.5) / s - 0.5;  // coarse index coordinate
        Stencil1D& st = out[p];
        if (n_coarse == 1) {
            continue;
        }
        if (n_coarse == 2) {
            st.first = 0;
            st.count = 2;
            st.weight = {1.0 - u, u, 0.0};
            continue;
        }
        const auto nearest = static_cast<long>(std::floor(u + 0.5));
        const long centre = std::clamp<long>(nearest, 1, static_cast<long>(n_coarse) - 2);
        const double t = u - static_cast<double>(centre);
        st.first = static_cast<std::size_t>(centre - 1);
        st.count = 3;
        st.weight = {0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)};
    }
    return out;
}

}  // namespace detail

/// Separable quadratic interpolation of cell-centred coarse samples.
inline Grid2D upsample_quadratic(const Grid2D& coarse, std::size_t scale_y, std::size_t scale_x) {
    if (scale_y == 0 || scale_x == 0) {
        throw Error(ErrorKind::invalid_argument, "upsampling scales must be positive");
    }
    if (scale_y == 1 && scale_x == 1) {
        return coarse;
    }
    const std::size_t hc = coarse.height();
    const std::size_t wf = coarse.width() * scale_x;
    const std::size_t hf = hc * scale_y;
    const auto sx = detail::quadratic_stencils(coarse.width(), scale_x);
    const auto sy = detail::quadratic_stencils(hc, scale_y);

    std::vector<double> rows(hc * wf);
    for (std::size_t i = 0; i < hc; ++i) {
        for (std::size_t q = 0; q < wf; ++q) {
            const auto& st = sx[q];
            double v = 0.0;
            for (std::size_t k = 0; k < st.count; ++k) {
                v += st.weight[k] * coarse(i, st.first + k);
            }
            rows[i * wf + q] = v;
        }
    }
    Grid2D out(hf, wf, coarse.dx() / static_cast<double>(scale_x), coarse.dy() / static_cast<double>(scale_y));
    for (std::size_t p = 0; p < hf; ++p) {
        const auto& st = sy[p];
        for (std::size_t q = 0; q < wf; ++q) {
            double v = 0.0;
            for (std::size_t k = 0; k < st.count; ++k) {
                v += st.weight[k] * rows[(st.first + k) * wf + q];
            }
            out(p, q) = v;
        }
    }
    return out;
}

inline GridPair make_pair(const Grid2D& fine, std::size_t scale_y, std::size_t scale_x) {
    return GridPair{coarsen_block_mean(fine, scale_y, scale_x), fine, scale_y, scale_x};
}

}  // namespace fluxdown
