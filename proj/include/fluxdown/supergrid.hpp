/// @file supergrid.hpp
/// @brief Supergrid tiling, boundary flux averages, effective flux ratios and
///        the multi-scale flux-ratio loss.
///
/// Every supergrid cell is walked along its perimeter in a fixed order: top
/// edge left to right, bottom edge left to right, left edge top to bottom,
/// right edge top to bottom. Corner pixels therefore appear once per incident
/// edge, each time with that edge's outward normal. Rows grow along +y, so
/// the top edge has normal (0, -1).
#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/findiff.hpp"
#include "fluxdown/grid.hpp"

namespace fluxdown {

struct BoundarySite {
    std::size_t i = 0;
    std::size_t j = 0;
    int nx = 0;
    int ny = 0;

    friend bool operator==(const BoundarySite&, const BoundarySite&) = default;
};

struct SupergridPartition {
    std::size_t cell_h = 1;
    std::size_t cell_w = 1;
    std::size_t n_rows = 1;
    std::size_t n_cols = 1;
    std::vector<std::vector<BoundarySite>> boundary_sites;  // one list per cell, row-major cell order

    std::size_t cell_count() const noexcept { return n_rows * n_cols; }
};

struct CellSize {
    std::size_t h = 1;
    std::size_t w = 1;

    friend bool operator==(const CellSize&, const CellSize&) = default;
};

/// How the fine field's ratios are aggregated onto the supergrid.
enum class FineAggregation {
    same_tiling,     // walk the fine pixels on each cell's physical perimeter
    coarsen_first,   // block-average the fine field to coarse resolution first
};

struct FluxOptions {
    double grad_eps = default_eps;   // stabiliser inside the gradient direction
    double ratio_eps = default_eps;  // stabiliser in the ratio denominator
    bool anomaly = false;            // subtract the per-cell mean of T before the advective sum
    FineAggregation aggregation = FineAggregation::same_tiling;
    std::optional<CellSize> cell_override;  // supergrid cell size on the coarse grid
};

struct FluxReport {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> phi_adv;
    std::vector<double> phi_diff;
    std::vector<double> r_eff;
    /// Boundary mean of grad(T).n. Not part of any loss; combined with an
    /// assumed diffusivity it gives the net boundary flux of F = uT - D grad T.
    std::vector<double> phi_normal_grad;
    double eps = default_eps;

    double net_flux(std::size_t cell, double diffusivity) const {
        return phi_adv.at(cell) - diffusivity * phi_normal_grad.at(cell);
    }
};

struct PdeLossResult {
    double loss = 0.0;
    std::vector<double> per_cell_sq_diff;
    std::size_t n_cells = 0;
    CellSize coarse_cell;
    FluxReport coarse;
    FluxReport fine;
};

/// Supergrid cell size from the gcd of the coarse dimensions: the grid is
/// split into g x g cells of (h / g) x (w / g) pixels.
inline CellSize choose_supergrid(std::size_t coarse_h, std::size_t coarse_w) {
    if (coarse_h == 0 || coarse_w == 0) {
        throw Error(ErrorKind::invalid_argument, "supergrid selection needs positive dimensions");
    }
    const std::size_t g = std::gcd(coarse_h, coarse_w);
    return {coarse_h / g, coarse_w / g};
}

inline SupergridPartition build_partition(std::size_t height, std::size_t width, std::size_t cell_h,
                                          std::size_t cell_w) {
    if (cell_h == 0 || cell_w == 0) {
        throw Error(ErrorKind::invalid_argument, "supergrid cell size must be positive");
    }
    if (height % cell_h != 0) {
        throw Error(ErrorKind::dimension_mismatch, "supergrid cell height " + std::to_string(cell_h) +
                                                       " does not divide grid height (y axis) " +
                                                       std::to_string(height));
    }
    if (width % cell_w != 0) {
        throw Error(ErrorKind::dimension_mismatch, "supergrid cell width " + std::to_string(cell_w) +
                                                       " does not divide grid width (x axis) " +
                                                       std::to_string(width));
    }
    SupergridPartition part;
    part.cell_h = cell_h;
    part.cell_w = cell_w;
    part.n_rows = height / cell_h;
    part.n_cols = width / cell_w;
    part.boundary_sites.resize(part.cell_count());
    for (std::size_t r = 0; r < part.n_rows; ++r) {
        for (std::size_t c = 0; c < part.n_cols; ++c) {
            auto& sites = part.boundary_sites[r * part.n_cols + c];
            sites.reserve(2 * (cell_h + cell_w));
            const std::size_t i0 = r * cell_h;
            const std::size_t j0 = c * cell_w;
            const std::size_t i1 = i0 + cell_h - 1;
            const std::size_t j1 = j0 + cell_w - 1;
            for (std::size_t j = j0; j <= j1; ++j) sites.push_back({i0, j, 0, -1});
            for (std::size_t j = j0; j <= j1; ++j) sites.push_back({i1, j, 0, 1});
            for (std::size_t i = i0; i <= i1; ++i) sites.push_back({i, j0, -1, 0});
            for (std::size_t i = i0; i <= i1; ++i) sites.push_back({i, j1, 1, 0});
        }
    }
    return part;
}

inline SupergridPartition build_partition(const Grid2D& grid, std::size_t cell_h, std::size_t cell_w) {
    return build_partition(grid.height(), grid.width(), cell_h, cell_w);
}

namespace detail {

inline void require_partition_matches(const Grid2D& grid, const SupergridPartition& part) {
    if (part.cell_h * part.n_rows != grid.height() || part.cell_w * part.n_cols != grid.width()) {
        throw Error(ErrorKind::dimension_mismatch,
                    "partition covers " + std::to_string(part.cell_h * part.n_rows) + "x" +
                        std::to_string(part.cell_w * part.n_cols) + " but grid is " + shape_string(grid));
    }
}

inline std::vector<double> cell_means(const Grid2D& grid, const SupergridPartition& part) {
    std::vector<double> means(part.cell_count(), 0.0);
    const double inv = 1.0 / static_cast<double>(part.cell_h * part.cell_w);
    for (std::size_t r = 0; r < part.n_rows; ++r) {
        for (std::size_t c = 0; c < part.n_cols; ++c) {
            double sum = 0.0;
            for (std::size_t a = 0; a < part.cell_h; ++a) {
                for (std::size_t b = 0; b < part.cell_w; ++b) {
                    sum += grid(r * part.cell_h + a, c * part.cell_w + b);
                }
            }
            means[r * part.n_cols + c] = sum * inv;
        }
    }
    return means;
}

}  // namespace detail

inline FluxReport cell_fluxes(const Grid2D& grid, const SupergridPartition& part, const FluxOptions& opts) {
    detail::require_partition_matches(grid, part);
    const GradientField g = gradient_central(grid, opts.grad_eps);
    std::vector<double> offsets(part.cell_count(), 0.0);
    if (opts.anomaly) {
        offsets = detail::cell_means(grid, part);
    }

    FluxReport rep;
    rep.n_rows = part.n_rows;
    rep.n_cols = part.n_cols;
    rep.eps = opts.ratio_eps;
    const std::size_t n = part.cell_count();
    rep.phi_adv.resize(n);
    rep.phi_diff.resize(n);
    rep.r_eff.resize(n);
    rep.phi_normal_grad.resize(n);
    for (std::size_t cell = 0; cell < n; ++cell) {
        const auto& sites = part.boundary_sites[cell];
        double adv = 0.0;
        double diff = 0.0;
        double normal = 0.0;
        for (const auto& s : sites) {
            const std::size_t k = g.index(s.i, s.j);
            const double t = grid(s.i, s.j) - offsets[cell];
            adv += t * (g.ux[k] * s.nx + g.uy[k] * s.ny);
            diff += g.mag[k];
            normal += g.gx[k] * s.nx + g.gy[k] * s.ny;
        }
        const double m = static_cast<double>(sites.size());
        rep.phi_adv[cell] = adv / m;
        rep.phi_diff[cell] = diff / m;
        rep.phi_normal_grad[cell] = normal / m;
        rep.r_eff[cell] = rep.phi_adv[cell] / (rep.phi_diff[cell] + opts.ratio_eps);
    }
    return rep;
}

/// Single-eps form: the same value stabilises the gradient direction and the ratio.
inline FluxReport cell_fluxes(const Grid2D& grid, const SupergridPartition& part, double eps = default_eps) {
    FluxOptions opts;
    opts.grad_eps = eps;
    opts.ratio_eps = eps;
    return cell_fluxes(grid, part, opts);
}

/// Coarse-grid supergrid cell size used for a coarse field under `opts`.
inline CellSize resolve_cell_size(const Grid2D& coarse, const FluxOptions& opts) {
    CellSize cell = opts.cell_override ? *opts.cell_override : choose_supergrid(coarse.height(), coarse.width());
    if (cell.h == 0 || cell.w == 0) {
        throw Error(ErrorKind::invalid_argument, "supergrid cell size must be positive");
    }
    if (coarse.height() % cell.h != 0) {
        throw Error(ErrorKind::dimension_mismatch, "supergrid cell height " + std::to_string(cell.h) +
                                                       " does not tile the coarse y axis of length " +
                                                       std::to_string(coarse.height()));
    }
    if (coarse.width() % cell.w != 0) {
        throw Error(ErrorKind::dimension_mismatch, "supergrid cell width " + std::to_string(cell.w) +
                                                       " does not tile the coarse x axis of length " +
                                                       std::to_string(coarse.width()));
    }
    return cell;
}

inline void require_fine_shape(const Grid2D& coarse, const Grid2D& fine, std::size_t scale_y,
                               std::size_t scale_x) {
    if (scale_y == 0 || scale_x == 0) {
        throw Error(ErrorKind::invalid_argument, "scales must be positive");
    }
    if (fine.height() != coarse.height() * scale_y) {
        throw Error(ErrorKind::dimension_mismatch,
                    "fine height (y axis) " + std::to_string(fine.height()) + " != coarse height " +
                        std::to_string(coarse.height()) + " x scale " + std::to_string(scale_y));
    }
    if (fine.width() != coarse.width() * scale_x) {
        throw Error(ErrorKind::dimension_mismatch,
                    "fine width (x axis) " + std::to_string(fine.width()) + " != coarse width " +
                        std::to_string(coarse.width()) + " x scale " + std::to_string(scale_x));
    }
}

/// Ratio report of a fine field on the physical tiling of a coarse cell size.
inline FluxReport fine_flux_report(const Grid2D& fine, CellSize coarse_cell, std::size_t scale_y,
                                   std::size_t scale_x, const FluxOptions& opts) {
    if (opts.aggregation == FineAggregation::coarsen_first) {
        const Grid2D agg = coarsen_block_mean(fine, scale_y, scale_x);
        return cell_fluxes(agg, build_partition(agg, coarse_cell.h, coarse_cell.w), opts);
    }
    return cell_fluxes(fine, build_partition(fine, coarse_cell.h * scale_y, coarse_cell.w * scale_x), opts);
}

/// Mean squared difference between fine and coarse effective flux ratios
/// over the shared supergrid cells.
inline PdeLossResult pde_loss(const Grid2D& coarse, const Grid2D& fine_field, std::size_t scale_y,
                              std::size_t scale_x, const FluxOptions& opts = {}) {
    require_fine_shape(coarse, fine_field, scale_y, scale_x);
    const CellSize cell = resolve_cell_size(coarse, opts);

    PdeLossResult res;
    res.coarse_cell = cell;
    res.coarse = cell_fluxes(coarse, build_partition(coarse, cell.h, cell.w), opts);
    res.fine = fine_flux_report(fine_field, cell, scale_y, scale_x, opts);
    res.n_cells = res.coarse.r_eff.size();
    res.per_cell_sq_diff.resize(res.n_cells);
    double sum = 0.0;
    for (std::size_t c = 0; c < res.n_cells; ++c) {
        const double d = res.fine.r_eff[c] - res.coarse.r_eff[c];
        res.per_cell_sq_diff[c] = d * d;
        sum += d * d;
    }
    res.loss = sum / static_cast<double>(res.n_cells);
    return res;
}

inline PdeLossResult pde_loss(const GridPair& pair, const Grid2D& fine_field, const FluxOptions& opts = {}) {
    return pde_loss(pair.coarse, fine_field, pair.scale_y, pair.scale_x, opts);
}

inline PdeLossResult pde_loss(const GridPair& pair, const Grid2D& fine_field, double eps,
                              std::optional<CellSize> cell_override = std::nullopt) {
    FluxOptions opts;
    opts.grad_eps = eps;
    opts.ratio_eps = eps;
    opts.cell_override = cell_override;
    return pde_loss(pair, fine_field, opts);
}

}  // namespace fluxdown
