/// @file findiff.hpp
/// @brief Central-difference gradients and the stabilised gradient direction.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/grid.hpp"

namespace fluxdown {

inline constexpr double default_eps = 1e-6;

/// Pointwise gradient of a grid. All arrays are row-major with the grid's shape.
struct GradientField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> gx;
    std::vector<double> gy;
    std::vector<double> mag;
    std::vector<double> ux;  // gx / (mag + eps)
    std::vector<double> uy;  // gy / (mag + eps)
    double eps = default_eps;

    std::size_t index(std::size_t i, std::size_t j) const noexcept { return i * width + j; }
};

inline void require_gradient_shape(const Grid2D& t) {
    if (t.height() < 2 || t.width() < 2) {
        throw Error(ErrorKind::too_small, "gradient needs at least 2x2 samples, got " + shape_string(t));
    }
}

/// Derivative along x at (i, j): centred in the interior, first-order
/// one-sided on the first and last column.
inline double ddx(const Grid2D& t, std::size_t i, std::size_t j) {
    const std::size_t w = t.width();
    if (j == 0) {
        return (t(i, 1) - t(i, 0)) / t.dx();
    }
    if (j == w - 1) {
        return (t(i, w - 1) - t(i, w - 2)) / t.dx();
    }
    return (t(i, j + 1) - t(i, j - 1)) / (2.0 * t.dx());
}

inline double ddy(const Grid2D& t, std::size_t i, std::size_t j) {
    const std::size_t h = t.height();
    if (i == 0) {
        return (t(1, j) - t(0, j)) / t.dy();
    }
    if (i == h - 1) {
        return (t(h - 1, j) - t(h - 2, j)) / t.dy();
    }
    return (t(i + 1, j) - t(i - 1, j)) / (2.0 * t.dy());
}

inline GradientField gradient_central(const Grid2D& t, double eps = default_eps) {
    require_gradient_shape(t);
    if (!(eps > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "gradient stabiliser eps must be positive");
    }
    GradientField g;
    g.height = t.height();
    g.width = t.width();
    g.eps = eps;
    const std::size_t n = t.size();
    g.gx.resize(n);
    g.gy.resize(n);
    g.mag.resize(n);
    g.ux.resize(n);
    g.uy.resize(n);
    for (std::size_t i = 0; i < g.height; ++i) {
        for (std::size_t j = 0; j < g.width; ++j) {
            const std::size_t k = g.index(i, j);
            const double gx = ddx(t, i, j);
            const double gy = ddy(t, i, j);
            const double m = std::sqrt(gx * gx + gy * gy);
            g.gx[k] = gx;
            g.gy[k] = gy;
            g.mag[k] = m;
            g.ux[k] = gx / (m + eps);
            g.uy[k] = gy / (m + eps);
        }
    }
    return g;
}

inline std::vector<double> gradient_magnitude(const Grid2D& t) {
    return gradient_central(t, default_eps).mag;
}

}  // namespace fluxdown
