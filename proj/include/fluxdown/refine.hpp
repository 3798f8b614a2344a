/// @file refine.hpp
/// @brief Gradient-descent refinement of a fine field under a fidelity anchor
///        plus the flux-ratio loss as a physics regulariser.
///
/// Objective: J(T) = mse(T, T_init) / s_fid + lambda * L_pde(coarse, T) / s_pde.
/// With normalisation enabled, s_fid is the variance of T_init and s_pde is
/// L_pde at T_init, so lambda is a relative weight.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/findiff.hpp"
#include "fluxdown/grid.hpp"
#include "fluxdown/supergrid.hpp"

namespace fluxdown {

enum class GradMode { numeric_central, analytic };

struct RefineConfig {
    double lambda_pde = 1.0;
    double step_size = 1.0;
    std::size_t max_iters = 100;
    GradMode grad_mode = GradMode::analytic;
    double fd_h = 1e-6;
    double tol = 0.0;  // stop when the relative objective decrease falls below this
    FluxOptions flux;
    bool normalize = true;  // refine() sets the scales below from the initial field
    double fidelity_scale = 1.0;
    double pde_scale = 1.0;
    bool backtracking = true;
    std::size_t max_halvings = 30;
};

struct ObjectiveTerms {
    double total = 0.0;
    double fidelity = 0.0;  // already divided by fidelity_scale
    double pde = 0.0;       // already divided by pde_scale
};

struct RefineTrace {
    std::vector<double> objective;
    std::vector<double> fidelity;
    std::vector<double> pde;
    std::size_t iters_run = 0;
    Grid2D final_field;
    double fidelity_scale = 1.0;
    double pde_scale = 1.0;
};

/// Raised when backtracking cannot find a decrease; carries the trace so far.
class RefineStall : public Error {
public:
    RefineStall(const std::string& what, RefineTrace trace)
        : Error(ErrorKind::stall, what), trace_(std::move(trace)) {}

    const RefineTrace& trace() const noexcept { return trace_; }

private:
    RefineTrace trace_;
};

namespace detail {

struct Scales {
    std::size_t y = 1;
    std::size_t x = 1;
};

inline Scales infer_scales(const Grid2D& coarse, const Grid2D& fine) {
    if (fine.height() % coarse.height() != 0) {
        throw Error(ErrorKind::dimension_mismatch, "fine height (y axis) " + std::to_string(fine.height()) +
                                                       " is not a multiple of coarse height " +
                                                       std::to_string(coarse.height()));
    }
    if (fine.width() % coarse.width() != 0) {
        throw Error(ErrorKind::dimension_mismatch, "fine width (x axis) " + std::to_string(fine.width()) +
                                                       " is not a multiple of coarse width " +
                                                       std::to_string(coarse.width()));
    }
    return {fine.height() / coarse.height(), fine.width() / coarse.width()};
}

/// Vector-Jacobian product of the per-cell ratios r_eff(T) with `r_bar`.
inline std::vector<double> flux_ratio_vjp(const Grid2D& grid, const SupergridPartition& part,
                                          const FluxOptions& opts, const std::vector<double>& r_bar) {
    const GradientField g = gradient_central(grid, opts.grad_eps);
    const FluxReport rep = cell_fluxes(grid, part, opts);
    std::vector<double> offsets(part.cell_count(), 0.0);
    if (opts.anomaly) offsets = cell_means(grid, part);

    const std::size_t n = grid.size();
    std::vector<double> t_bar(n, 0.0);
    std::vector<double> gx_bar(n, 0.0);
    std::vector<double> gy_bar(n, 0.0);
    const double cell_px = static_cast<double>(part.cell_h * part.cell_w);

    for (std::size_t cell = 0; cell < part.cell_count(); ++cell) {
        if (r_bar[cell] == 0.0) continue;
        const auto& sites = part.boundary_sites[cell];
        const double m_inv = 1.0 / static_cast<double>(sites.size());
        const double denom = rep.phi_diff[cell] + opts.ratio_eps;
        const double a_bar = r_bar[cell] / denom * m_inv;
        const double b_bar = -r_bar[cell] * rep.phi_adv[cell] / (denom * denom) * m_inv;
        double offset_bar = 0.0;
        for (const auto& s : sites) {
            const std::size_t k = g.index(s.i, s.j);
            const double gx = g.gx[k];
            const double gy = g.gy[k];
            const double mag = g.mag[k];
            const double me = mag + opts.grad_eps;
            const double proj = gx * s.nx + gy * s.ny;
            const double dot = proj / me;
            const double tval = grid(s.i, s.j) - offsets[cell];

            t_bar[k] += a_bar * dot;
            offset_bar -= a_bar * dot;

            const double dmx = mag > 0.0 ? gx / mag : 0.0;
            const double dmy = mag > 0.0 ? gy / mag : 0.0;
            const double q = a_bar * tval;
            gx_bar[k] += q * (s.nx / me - proj / (me * me) * dmx) + b_bar * dmx;
            gy_bar[k] += q * (s.ny / me - proj / (me * me) * dmy) + b_bar * dmy;
        }
        if (opts.anomaly && offset_bar != 0.0) {
            const std::size_t r = cell / part.n_cols;
            const std::size_t c = cell % part.n_cols;
            for (std::size_t a = 0; a < part.cell_h; ++a) {
                for (std::size_t b = 0; b < part.cell_w; ++b) {
                    t_bar[(r * part.cell_h + a) * grid.width() + c * part.cell_w + b] += offset_bar / cell_px;
                }
            }
        }
    }

    // Transpose of the difference stencils in findiff.
    const std::size_t h = grid.height();
    const std::size_t w = grid.width();
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t k = i * w + j;
            if (const double gb = gx_bar[k]; gb != 0.0) {
                if (j == 0) {
                    t_bar[i * w + 1] += gb / grid.dx();
                    t_bar[i * w] -= gb / grid.dx();
                } else if (j == w - 1) {
                    t_bar[i * w + w - 1] += gb / grid.dx();
                    t_bar[i * w + w - 2] -= gb / grid.dx();
                } else {
                    t_bar[k + 1] += gb / (2.0 * grid.dx());
                    t_bar[k - 1] -= gb / (2.0 * grid.dx());
                }
            }
            if (const double gb = gy_bar[k]; gb != 0.0) {
                if (i == 0) {
                    t_bar[w + j] += gb / grid.dy();
                    t_bar[j] -= gb / grid.dy();
                } else if (i == h - 1) {
                    t_bar[(h - 1) * w + j] += gb / grid.dy();
                    t_bar[(h - 2) * w + j] -= gb / grid.dy();
                } else {
                    t_bar[k + w] += gb / (2.0 * grid.dy());
                    t_bar[k - w] -= gb / (2.0 * grid.dy());
                }
            }
        }
    }
    return t_bar;
}

/// d L_pde / d fine_field for a fixed coarse field.
inline std::vector<double> pde_loss_gradient(const Grid2D& coarse, const Grid2D& fine, const FluxOptions& opts) {
    const Scales sc = infer_scales(coarse, fine);
    const PdeLossResult res = pde_loss(coarse, fine, sc.y, sc.x, opts);
    std::vector<double> r_bar(res.n_cells);
    for (std::size_t c = 0; c < res.n_cells; ++c) {
        r_bar[c] = 2.0 * (res.fine.r_eff[c] - res.coarse.r_eff[c]) / static_cast<double>(res.n_cells);
    }
    const CellSize cell = res.coarse_cell;
    if (opts.aggregation == FineAggregation::coarsen_first) {
        const Grid2D agg = coarsen_block_mean(fine, sc.y, sc.x);
        const auto agg_bar = flux_ratio_vjp(agg, build_partition(agg, cell.h, cell.w), opts, r_bar);
        std::vector<double> out(fine.size());
        const double inv = 1.0 / static_cast<double>(sc.y * sc.x);
        for (std::size_t i = 0; i < fine.height(); ++i) {
            for (std::size_t j = 0; j < fine.width(); ++j) {
                out[i * fine.width() + j] = agg_bar[(i / sc.y) * agg.width() + j / sc.x] * inv;
            }
        }
        return out;
    }
    return flux_ratio_vjp(fine, build_partition(fine, cell.h * sc.y, cell.w * sc.x), opts, r_bar);
}

inline double mean_squared_deviation(const Grid2D& a, const Grid2D& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.values()[k] - b.values()[k];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

inline double variance(const Grid2D& g) {
    const double m = g.mean();
    double s = 0.0;
    for (double v : g.values()) s += (v - m) * (v - m);
    return s / static_cast<double>(g.size());
}

}  // namespace detail

inline ObjectiveTerms objective(const Grid2D& fine, const Grid2D& init, const Grid2D& coarse,
                                const RefineConfig& cfg) {
    require_same_shape(fine, init, "refine objective");
    const detail::Scales sc = detail::infer_scales(coarse, fine);
    ObjectiveTerms out;
    out.fidelity = detail::mean_squared_deviation(fine, init) / cfg.fidelity_scale;
    out.pde = pde_loss(coarse, fine, sc.y, sc.x, cfg.flux).loss / cfg.pde_scale;
    out.total = out.fidelity + cfg.lambda_pde * out.pde;
    return out;
}

inline Grid2D gradient(const Grid2D& fine, const Grid2D& init, const Grid2D& coarse, const RefineConfig& cfg) {
    require_same_shape(fine, init, "refine gradient");
    Grid2D out(fine.height(), fine.width(), fine.dx(), fine.dy());
    auto g = out.values();
    if (cfg.grad_mode == GradMode::numeric_central) {
        if (!(cfg.fd_h > 0.0)) {
            throw Error(ErrorKind::invalid_argument, "finite-difference step must be positive");
        }
        Grid2D probe = fine;
        auto p = probe.values();
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double orig = p[k];
            p[k] = orig + cfg.fd_h;
            const double up = objective(probe, init, coarse, cfg).total;
            p[k] = orig - cfg.fd_h;
            const double down = objective(probe, init, coarse, cfg).total;
            p[k] = orig;
            g[k] = (up - down) / (2.0 * cfg.fd_h);
        }
        return out;
    }
    const double n = static_cast<double>(fine.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] = 2.0 * (fine.values()[k] - init.values()[k]) / (n * cfg.fidelity_scale);
    }
    if (cfg.lambda_pde != 0.0) {
        const auto dp = detail::pde_loss_gradient(coarse, fine, cfg.flux);
        const double w = cfg.lambda_pde / cfg.pde_scale;
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * dp[k];
    }
    return out;
}

/// Sets fidelity_scale and pde_scale from the initial field when normalisation is on.
inline RefineConfig normalized_config(const Grid2D& init, const Grid2D& coarse, RefineConfig cfg) {
    if (!cfg.normalize) return cfg;
    const double var = detail::variance(init);
    cfg.fidelity_scale = var > 0.0 ? var : 1.0;
    const detail::Scales sc = detail::infer_scales(coarse, init);
    const double pde0 = pde_loss(coarse, init, sc.y, sc.x, cfg.flux).loss;
    cfg.pde_scale = pde0 > 0.0 ? pde0 : 1.0;
    return cfg;
}

inline RefineTrace refine(const Grid2D& init, const Grid2D& coarse, RefineConfig cfg) {
    if (!(cfg.step_size > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "step size must be positive");
    }
    if (cfg.lambda_pde < 0.0 || !std::isfinite(cfg.lambda_pde)) {
        throw Error(ErrorKind::invalid_argument, "lambda_pde must be a non-negative finite number");
    }
    if (cfg.max_iters == 0) {
        throw Error(ErrorKind::invalid_argument, "max_iters must be positive");
    }
    cfg = normalized_config(init, coarse, cfg);

    RefineTrace trace;
    trace.fidelity_scale = cfg.fidelity_scale;
    trace.pde_scale = cfg.pde_scale;
    auto record = [&trace](const ObjectiveTerms& t) {
        trace.objective.push_back(t.total);
        trace.fidelity.push_back(t.fidelity);
        trace.pde.push_back(t.pde);
    };

    Grid2D x = init;
    ObjectiveTerms cur = objective(x, init, coarse, cfg);
    record(cur);
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        trace.iters_run = it;
        const Grid2D g = gradient(x, init, coarse, cfg);
        double gmax = 0.0;
        for (double v : g.values()) gmax = std::max(gmax, std::abs(v));
        if (gmax == 0.0) {
            break;  // stationary
        }
        double step = cfg.step_size;
        bool accepted = false;
        Grid2D cand = x;
        ObjectiveTerms next;
        for (std::size_t halving = 0; halving <= cfg.max_halvings; ++halving) {
            auto cv = cand.values();
            for (std::size_t k = 0; k < cv.size(); ++k) cv[k] = x.values()[k] - step * g.values()[k];
            next = objective(cand, init, coarse, cfg);
            if (!cfg.backtracking || next.total < cur.total) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            trace.final_field = x;
            throw RefineStall("line search found no decrease after " + std::to_string(cfg.max_halvings) +
                                  " halvings at iteration " + std::to_string(it),
                              std::move(trace));
        }
        const double rel = (cur.total - next.total) / std::max(std::abs(cur.total), 1e-300);
        x = std::move(cand);
        cur = next;
        record(cur);
        if (rel < cfg.tol) break;
    }
    trace.final_field = std::move(x);
    return trace;
}

}  // namespace fluxdown
