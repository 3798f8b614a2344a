/// @file synth.hpp
/// @brief Synthetic fields with known properties: constants, affine ramps,
///        power-law Gaussian random fields and a periodic advection-diffusion
///        stepper for building coarse/fine scenario pairs.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/fft.hpp"
#include "fluxdown/grid.hpp"
#include "fluxdown/spectral.hpp"

namespace fluxdown {

inline Grid2D gen_constant(std::size_t h, std::size_t w, double value, double dx = 1.0, double dy = 1.0) {
    return Grid2D(h, w, dx, dy, std::vector<double>(h * w, value));
}

/// T = a x + b y + c sampled at cell centres.
inline Grid2D gen_affine(std::size_t h, std::size_t w, double a, double b, double c, double dx = 1.0,
                         double dy = 1.0) {
    Grid2D g(h, w, dx, dy);
    for (std::size_t i = 0; i < h; ++i) {
        const double y = (static_cast<double>(i) + 0.5) * dy;
        for (std::size_t j = 0; j < w; ++j) {
            const double x = (static_cast<double>(j) + 0.5) * dx;
            g(i, j) = a * x + b * y + c;
        }
    }
    return g;
}

/// Isotropic Gaussian bump on a constant background; sigma in grid cells.
inline Grid2D gen_gaussian_blob(std::size_t h, std::size_t w, double amplitude, double sigma,
                                double background = 0.0, double dx = 1.0, double dy = 1.0) {
    Grid2D g(h, w, dx, dy);
    const double ci = 0.5 * static_cast<double>(h) - 0.5;
    const double cj = 0.5 * static_cast<double>(w) - 0.5;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double di = static_cast<double>(i) - ci;
            const double dj = static_cast<double>(j) - cj;
            g(i, j) = background + amplitude * std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
        }
    }
    return g;
}

struct GrfSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    double target_slope = -3.0;  // log-log slope of the radially averaged PSD
    std::uint64_t seed = 0;
    double amplitude = 1.0;  // standard deviation of the output field
    double dx = 1.0;
    double dy = 1.0;
};

/// Zero-mean Gaussian random field whose power spectrum follows k^target_slope.
inline Grid2D gen_grf(const GrfSpec& spec) {
    if (!(spec.target_slope < 0.0)) {
        throw Error(ErrorKind::invalid_argument, "GRF target slope must be negative");
    }
    if (!(spec.amplitude > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "GRF amplitude must be positive");
    }
    if (spec.height < 2 || spec.width < 2) {
        throw Error(ErrorKind::invalid_argument, "GRF needs at least 2x2 samples");
    }
    const std::size_t h = spec.height;
    const std::size_t w = spec.width;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> buf(h * w);
    for (auto& z : buf) z = normal(rng);

    // The transform of real noise is exactly Hermitian; the radial filter is
    // symmetric under k -> -k, so the shaped spectrum stays Hermitian.
    detail::fft2d(buf, h, w, detail::FftDirection::forward);
    for (std::size_t ky = 0; ky < h; ++ky) {
        for (std::size_t kx = 0; kx < w; ++kx) {
            const double k = radial_wavenumber(ky, kx, h, w);
            buf[ky * w + kx] *= k > 0.0 ? std::pow(k, 0.5 * spec.target_slope) : 0.0;
        }
    }
    detail::fft2d(buf, h, w, detail::FftDirection::inverse);

    Grid2D g(h, w, spec.dx, spec.dy);
    auto vals = g.values();
    double sum = 0.0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        vals[k] = buf[k].real();
        sum += vals[k];
    }
    const double mean = sum / static_cast<double>(vals.size());
    double var = 0.0;
    for (auto& v : vals) {
        v -= mean;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(vals.size()));
    if (!(sd > 0.0)) {
        throw Error(ErrorKind::degenerate, "GRF has zero variance");
    }
    const double scale = spec.amplitude / sd;
    for (auto& v : vals) v *= scale;
    return g;
}

struct AdvDiffSpec {
    double u_x = 0.0;
    double u_y = 0.0;
    double diffusivity = 0.0;
    double dt = 1.0;
    std::size_t steps = 0;
    Grid2D initial;  // also fixes dimensions and spacings; boundaries are periodic
};

struct CflNumbers {
    double advective = 0.0;  // |u_x| dt/dx + |u_y| dt/dy
    double diffusive = 0.0;  // D dt (1/dx^2 + 1/dy^2)
};

inline CflNumbers cfl_numbers(const AdvDiffSpec& spec) {
    const double dx = spec.initial.dx();
    const double dy = spec.initial.dy();
    return {std::abs(spec.u_x) * spec.dt / dx + std::abs(spec.u_y) * spec.dt / dy,
            spec.diffusivity * spec.dt * (1.0 / (dx * dx) + 1.0 / (dy * dy))};
}

/// Forward Euler with first-order upwind advection and centred diffusion on a
/// periodic grid. The update is a convex combination of neighbours as long as
/// advective + 2 * diffusive CFL <= 1, which is what is enforced.
inline Grid2D step_advdiff(const AdvDiffSpec& spec) {
    const Grid2D& init = spec.initial;
    if (init.size() == 0) {
        throw Error(ErrorKind::invalid_argument, "advection-diffusion needs an initial field");
    }
    if (!(spec.dt > 0.0) || spec.diffusivity < 0.0) {
        throw Error(ErrorKind::invalid_argument, "dt must be positive and diffusivity non-negative");
    }
    const CflNumbers cfl = cfl_numbers(spec);
    if (!(cfl.advective + 2.0 * cfl.diffusive <= 1.0)) {
        std::ostringstream msg;
        msg << "unstable time step: advective CFL " << cfl.advective << ", diffusive CFL " << cfl.diffusive
            << " (need advective + 2 * diffusive <= 1)";
        throw Error(ErrorKind::stability, msg.str());
    }
    const double cx = spec.u_x * spec.dt / init.dx();
    const double cy = spec.u_y * spec.dt / init.dy();
    const double ax = spec.diffusivity * spec.dt / (init.dx() * init.dx());
    const double ay = spec.diffusivity * spec.dt / (init.dy() * init.dy());
    const double w_left = (cx > 0.0 ? cx : 0.0) + ax;
    const double w_right = (cx < 0.0 ? -cx : 0.0) + ax;
    const double w_up = (cy > 0.0 ? cy : 0.0) + ay;  // neighbour at i - 1
    const double w_down = (cy < 0.0 ? -cy : 0.0) + ay;
    const double w_centre = 1.0 - (w_left + w_right + w_up + w_down);

    const std::size_t h = init.height();
    const std::size_t w = init.width();
    Grid2D cur = init;
    Grid2D next = init;
    for (std::size_t s = 0; s < spec.steps; ++s) {
        for (std::size_t i = 0; i < h; ++i) {
            const std::size_t im = (i + h - 1) % h;
            const std::size_t ip = (i + 1) % h;
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t jm = (j + w - 1) % w;
                const std::size_t jp = (j + 1) % w;
                next(i, j) = w_centre * cur(i, j) + w_left * cur(i, jm) + w_right * cur(i, jp) +
                             w_up * cur(im, j) + w_down * cur(ip, j);
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

inline GridPair make_scenario(const AdvDiffSpec& spec, std::size_t scale) {
    return make_pair(step_advdiff(spec), scale, scale);
}

/// Scenario description read from a key-value file.
///
/// Grammar: one `key = value` per line; `#` starts a comment; blank lines are
/// ignored. Keys: height, width, dx, dy, ux, uy, D (or diffusivity), dt,
/// steps, scale, seed, slope, amplitude, offset. The initial field is
/// offset + GRF(slope, amplitude, seed).
struct ScenarioConfig {
    std::size_t height = 64;
    std::size_t width = 64;
    double dx = 1.0;
    double dy = 1.0;
    double ux = 0.0;
    double uy = 0.0;
    double diffusivity = 0.0;
    double dt = 1.0;
    std::size_t steps = 0;
    std::size_t scale = 2;
    std::uint64_t seed = 0;
    double slope = -3.0;
    double amplitude = 1.0;
    double offset = 0.0;
};

inline ScenarioConfig parse_scenario_config(std::string_view text) {
    ScenarioConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::parse, "scenario line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_double = [&] {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(val, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != val.size() || !std::isfinite(v)) {
                throw Error(ErrorKind::parse, "scenario line " + std::to_string(line_no) + ": bad number '" +
                                                  val + "' for " + key);
            }
            return v;
        };
        auto as_count = [&] {
            const double v = as_double();
            if (v < 0.0 || v != std::floor(v)) {
                throw Error(ErrorKind::parse, "scenario line " + std::to_string(line_no) + ": " + key +
                                                  " must be a non-negative integer");
            }
            return static_cast<std::size_t>(v);
        };
        if (key == "height") cfg.height = as_count();
        else if (key == "width") cfg.width = as_count();
        else if (key == "dx") cfg.dx = as_double();
        else if (key == "dy") cfg.dy = as_double();
        else if (key == "ux") cfg.ux = as_double();
        else if (key == "uy") cfg.uy = as_double();
        else if (key == "D" || key == "diffusivity") cfg.diffusivity = as_double();
        else if (key == "dt") cfg.dt = as_double();
        else if (key == "steps") cfg.steps = as_count();
        else if (key == "scale") cfg.scale = as_count();
        else if (key == "seed") cfg.seed = as_count();
        else if (key == "slope") cfg.slope = as_double();
        else if (key == "amplitude") cfg.amplitude = as_double();
        else if (key == "offset") cfg.offset = as_double();
        else {
            throw Error(ErrorKind::parse, "scenario line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

inline AdvDiffSpec build_advdiff_spec(const ScenarioConfig& cfg) {
    GrfSpec grf;
    grf.height = cfg.height;
    grf.width = cfg.width;
    grf.target_slope = cfg.slope;
    grf.seed = cfg.seed;
    grf.amplitude = cfg.amplitude;
    grf.dx = cfg.dx;
    grf.dy = cfg.dy;
    Grid2D init = gen_grf(grf);
    for (auto& v : init.values()) v += cfg.offset;
    return AdvDiffSpec{cfg.ux, cfg.uy, cfg.diffusivity, cfg.dt, cfg.steps, std::move(init)};
}

}  // namespace fluxdown
