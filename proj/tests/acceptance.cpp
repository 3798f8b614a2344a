/// @file acceptance.cpp
/// @brief Runs every acceptance criterion, printing one PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "fluxdown/fluxdown.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fluxdown;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> body;
};

std::vector<std::size_t> divisors(std::size_t n) {
    std::vector<std::size_t> d;
    for (std::size_t k = 1; k <= n; ++k)
        if (n % k == 0) d.push_back(k);
    return d;
}

template <typename T>
T pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[rng() % v.size()];
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// 1
Outcome flux_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> dim(4, 12);
    std::uniform_int_distribution<std::size_t> scale(1, 3);
    std::size_t cell_checks = 0;
    std::size_t mismatches = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = dim(rng), w = dim(rng);
        const std::size_t sy = scale(rng), sx = scale(rng);
        const std::size_t ch = pick(divisors(h), rng), cw = pick(divisors(w), rng);
        const double dx = 0.5 + 0.25 * static_cast<double>(rng() % 4);
        const Grid2D coarse = testutil::random_grid(h, w, rng, 270.0, 300.0, dx, dx);
        const Grid2D fine = testutil::random_grid(h * sy, w * sx, rng, 270.0, 300.0, dx / sx, dx / sy);
        const double t_max = max_abs(fine.values());

        // Advective sums cancel on narrow cells, so they are compared
        // relative to the size of their summands.
        const FluxReport r = cell_fluxes(coarse, build_partition(coarse, ch, cw));
        const auto o = oracle::perimeter_walk(testutil::to_field(coarse), ch, cw, default_eps);
        for (std::size_t c = 0; c < o.size(); ++c) {
            ++cell_checks;
            const bool ok = oracle::rel_close(r.phi_adv[c], o[c].adv, 1e-10, 1e-10 * t_max) &&
                            oracle::rel_close(r.phi_diff[c], o[c].diff, 1e-10) &&
                            oracle::rel_close(r.r_eff[c], o[c].ratio, 1e-10, 1e-10 * t_max / (o[c].diff + default_eps));
            mismatches += !ok;
            worst = std::max(worst, std::abs(r.r_eff[c] - o[c].ratio) / std::max(std::abs(o[c].ratio), 1e-300));
        }

        FluxOptions opts;
        opts.cell_override = CellSize{ch, cw};
        const double loss = pde_loss(coarse, fine, sy, sx, opts).loss;
        const double ref =
            oracle::flux_loss(testutil::to_field(coarse), testutil::to_field(fine), sy, sx, ch, cw, default_eps);
        if (!oracle::rel_close(loss, ref, 1e-10, 1e-14)) ++mismatches;
    }
    std::ostringstream d;
    d << "200 grids, " << cell_checks << " cells, " << mismatches << " mismatches";
    return {mismatches == 0, d.str()};
}

// 2
Outcome pde_identity() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> dim(2, 16);
    std::uniform_real_distribution<double> level(-50.0, 350.0);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = dim(rng), w = dim(rng);
        const Grid2D g = testutil::random_grid(h, w, rng, 250.0, 320.0);
        if (pde_loss(g, g, 1, 1).loss != 0.0) ++failures;

        const std::size_t sy = 1 + rng() % 4, sx = 1 + rng() % 4;
        FluxOptions opts;
        opts.cell_override = CellSize{pick(divisors(h), rng), pick(divisors(w), rng)};
        const Grid2D c = gen_constant(h, w, level(rng));
        const Grid2D f = gen_constant(h * sy, w * sx, level(rng));
        if (pde_loss(c, f, sy, sx, opts).loss != 0.0) ++failures;
    }
    return {failures == 0, "100 identity + 100 constant pairs, " + std::to_string(failures) + " nonzero"};
}

// 3
Outcome findiff_order() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double a = coef(rng), b = coef(rng), c = coef(rng);
        const Grid2D t = gen_affine(5 + rng() % 10, 5 + rng() % 10, a, b, c, 0.5, 0.25);
        const GradientField g = gradient_central(t);
        for (std::size_t i = 1; i + 1 < t.height(); ++i)
            for (std::size_t j = 1; j + 1 < t.width(); ++j)
                worst = std::max({worst, std::abs(g.gx[g.index(i, j)] - a) / std::abs(a),
                                  std::abs(g.gy[g.index(i, j)] - b) / std::abs(b)});
    }
    auto interior_error = [](std::size_t n) {
        const double len = 2.0;
        const double h = len / static_cast<double>(n);
        const double k = 2.0 * std::numbers::pi / len;
        Grid2D t(n, n, h, h);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) t(i, j) = std::sin(k * (j + 0.5) * h) * std::cos(k * (i + 0.5) * h);
        const GradientField g = gradient_central(t);
        double err = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const double x = (j + 0.5) * h, y = (i + 0.5) * h;
                err = std::max({err, std::abs(g.gx[g.index(i, j)] - k * std::cos(k * x) * std::cos(k * y)),
                                std::abs(g.gy[g.index(i, j)] + k * std::sin(k * x) * std::sin(k * y))});
            }
        }
        return err;
    };
    const double ratio = interior_error(32) / interior_error(64);
    std::ostringstream d;
    d << "affine worst rel " << worst << ", error ratio h/(h/2) " << ratio;
    return {worst <= 1e-12 && ratio >= 3.5 && ratio <= 4.5, d.str()};
}

// 4
Outcome spectral_closure() {
    bool ok = true;
    std::ostringstream d;
    double worst_parseval = 0.0;
    for (double beta : {-1.5, -2.5, -3.5}) {
        double mean = 0.0;
        double worst_seed = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            GrfSpec spec;
            spec.height = spec.width = 128;
            spec.target_slope = beta;
            spec.seed = seed;
            const Grid2D g = gen_grf(spec);
            const PowerSpectrum2D p = power_spectrum_2d(g);
            double energy = 0.0;
            double spectral = 0.0;
            for (double v : g.values()) energy += v * v;
            for (double v : p.power) spectral += v;
            spectral /= static_cast<double>(g.size());
            worst_parseval = std::max(worst_parseval, std::abs(spectral - energy) / energy);
            const SpectrumProfile prof = radial_profile(p);
            const FitRange r = default_fit_range(prof, 128, 128);
            const double alpha = fit_slope(prof, r.lo, r.hi).alpha;
            mean += alpha / 10.0;
            worst_seed = std::max(worst_seed, std::abs(alpha - beta));
        }
        ok = ok && std::abs(mean - beta) <= 0.15 && worst_seed <= 0.4;
        d << "beta " << beta << ": mean " << mean << ", worst seed dev " << worst_seed << "; ";
    }
    ok = ok && worst_parseval <= 1e-10;
    d << "Parseval worst rel " << worst_parseval;
    return {ok, d.str()};
}

// 5
Outcome metric_oracle() {
    std::mt19937_64 rng(505);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 2 + rng() % 20, w = 2 + rng() % 20;
        const Grid2D t = testutil::random_grid(h, w, rng, 250.0, 310.0);
        const Grid2D p = testutil::random_grid(h, w, rng, 250.0, 310.0);
        const auto ref =
            oracle::naive_stats({p.values().begin(), p.values().end()}, {t.values().begin(), t.values().end()});
        const MetricReport r = compute_metrics(p, t);
        const bool ok = oracle::rel_close(r.rmse, ref.rmse, 1e-12) && oracle::rel_close(r.r2, ref.r2, 1e-12) &&
                        oracle::rel_close(r.pcc, ref.pcc, 1e-12) && oracle::rel_close(r.bias, ref.bias, 1e-12, 1e-12);
        mismatches += !ok;
    }
    const MetricReport fx = compute_metrics(Grid2D(2, 2, 1.0, 1.0, {1, 2, 3, 6}), Grid2D(2, 2, 1.0, 1.0, {1, 2, 3, 4}));
    const bool fixture = fx.rmse == 1.0 && fx.r2 == 0.2 && fx.bias == 0.5;
    std::ostringstream d;
    d << "100 pairs, " << mismatches << " mismatches; fixture rmse " << fx.rmse << " r2 " << fx.r2 << " bias " << fx.bias;
    return {mismatches == 0 && fixture, d.str()};
}

// 6
Outcome gradient_check() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> lam(0.1, 5.0);
    const std::vector<CellSize> cells{{1, 1}, {2, 2}, {4, 4}, {2, 4}, {4, 1}};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Grid2D init = testutil::random_grid(8, 8, rng, 280.0, 290.0);
        const Grid2D fine = testutil::random_grid(8, 8, rng, 280.0, 290.0);
        const Grid2D coarse = testutil::random_grid(4, 4, rng, 280.0, 290.0);
        RefineConfig cfg;
        cfg.lambda_pde = lam(rng);
        cfg.flux.cell_override = cells[trial % cells.size()];
        cfg.flux.anomaly = trial % 2 == 1;
        if (trial % 7 == 3) cfg.flux.aggregation = FineAggregation::coarsen_first;
        cfg = normalized_config(init, coarse, cfg);
        const Grid2D a = gradient(fine, init, coarse, cfg);
        cfg.grad_mode = GradMode::numeric_central;
        cfg.fd_h = 1e-5;
        const Grid2D n = gradient(fine, init, coarse, cfg);
        double diff = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a.values()[k] - n.values()[k]));
        worst = std::max(worst, diff / max_abs(n.values()));
    }
    std::ostringstream d;
    d << "20 instances, worst relative max-norm gap " << worst;
    return {worst <= 1e-4, d.str()};
}

// 7
Outcome regularization() {
    int pde_wins = 0;
    int spec_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GrfSpec spec;
        spec.height = spec.width = 64;
        spec.seed = seed;
        const Grid2D truth = gen_grf(spec);
        const Grid2D coarse = coarsen_block_mean(truth, 4, 4);
        Grid2D init = upsample_quadratic(coarse, 4, 4);
        std::mt19937_64 rng(1000 + seed);
        std::normal_distribution<double> noise(0.0, 0.1 * spec.amplitude);
        for (auto& v : init.values()) v += noise(rng);
        RefineConfig cfg;
        cfg.max_iters = 50;
        const RefineTrace t = refine(init, coarse, cfg);
        pde_wins += pde_loss(coarse, t.final_field, 4, 4).loss < pde_loss(coarse, init, 4, 4).loss;
        spec_wins += spectral_loss(t.final_field, truth) < spectral_loss(init, truth);
    }
    std::ostringstream d;
    d << "L_PDE reduced " << pde_wins << "/10, L_spec reduced " << spec_wins << "/10";
    return {pde_wins == 10 && spec_wins >= 7, d.str()};
}

// 8
Outcome stepper_physics() {
    double worst_heat = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        GrfSpec g;
        g.height = 48;
        g.width = 64;
        g.seed = seed;
        Grid2D init = gen_grf(g);
        for (auto& v : init.values()) v += 288.15;
        const AdvDiffSpec spec{0.3, -0.2, 0.1, 1.0, 1000, init};
        double before = 0.0, after = 0.0;
        for (double v : init.values()) before += v;
        const Grid2D out = step_advdiff(spec);
        for (double v : out.values()) after += v;
        worst_heat = std::max(worst_heat, std::abs(after - before) / std::abs(before));
    }
    GrfSpec g;
    g.height = 16;
    g.width = 24;
    const Grid2D init = gen_grf(g);
    const Grid2D one = step_advdiff({1.0, 0.0, 0.0, 1.0, 1, init});
    const Grid2D many = step_advdiff({0.0, 2.0, 0.0, 0.5, 7, init});
    bool shift = true;
    for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t j = 0; j < 24; ++j) {
            shift = shift && one(i, j) == init(i, (j + 23) % 24);
            shift = shift && many(i, j) == init((i + 16 - 7) % 16, j);
        }
    }
    std::ostringstream d;
    d << "worst relative heat drift " << worst_heat << " over 1000 steps, exact shift " << (shift ? "yes" : "no");
    return {worst_heat <= 1e-8 && shift, d.str()};
}

// 9
Outcome format_contract() {
    std::mt19937_64 rng(909);
    bool roundtrip = true;
    for (int trial = 0; trial < 20; ++trial) {
        Grid2D g = testutil::random_grid(1 + rng() % 30, 1 + rng() % 30, rng, -400.0, 400.0, 0.1 * (1 + trial), 0.3);
        for (auto& v : g.values()) v = static_cast<float>(v);
        const auto bytes = serialize_fgrd(g);
        const Grid2D back = parse_fgrd(bytes);
        roundtrip = roundtrip && back == g && serialize_fgrd(back) == bytes;
    }
    const bool size54 = serialize_fgrd(Grid2D(2, 3, 1.0, 1.0, {1, 2, 3, 4, 5, 6})).size() == 54;

    const std::string d = clirun::scratch("acceptance");
    detail::write_text_file(d + "a.csv", "1,2\n3,4\n");
    detail::write_text_file(d + "b.csv", "1,2,3\n3,4,5\n");
    const std::string synth = "synth grf --h 32 --w 32 --seed 3 --scale 4 --out-coarse " + d + "c.fgrd --out-fine ";
    std::string codes = std::to_string(clirun::run(synth + d + "f.fgrd").code);
    codes += std::to_string(clirun::run("synth affine --h 16 --w 16 --c 5 --out-fine " + d + "flat.fgrd").code);
    // A rescaled field with an enormous step never decreases the objective.
    Grid2D far = read_fgrd(d + "f.fgrd");
    for (auto& v : far.values()) v *= 1.5;
    write_fgrd(far, d + "far.fgrd");
    const std::vector<std::string> failing{
        "metrics --pred " + d + "nope.fgrd --truth " + d + "a.csv",
        "synth grf --h 8 --w 8",
        "metrics --pred " + d + "a.csv --truth " + d + "b.csv",
        "ralsd --in " + d + "flat.fgrd",
        "refine --step 1e300 --init " + d + "far.fgrd --coarse " + d + "c.fgrd --out " + d + "o.fgrd",
    };
    for (const auto& args : failing) codes += std::to_string(clirun::run(args).code);
    const bool exits = codes == "0012345";

    const bool synth_same = clirun::run(synth + d + "s1.fgrd").code == 0 &&
                            clirun::run(synth + d + "s2.fgrd").code == 0 &&
                            clirun::slurp(d + "s1.fgrd") == clirun::slurp(d + "s2.fgrd");
    const std::string metrics = "metrics --pred " + d + "s1.fgrd --truth " + d + "s2.fgrd --coarse " + d +
                                "c.fgrd --report-json ";
    const auto m1 = clirun::run(metrics + d + "r1.json");
    const auto m2 = clirun::run(metrics + d + "r2.json");
    const std::string j1 = clirun::slurp(d + "r1.json");
    const std::string j2 = clirun::slurp(d + "r2.json");
    const bool report_same = m1.code == 0 && m1.out == m2.out && !j1.empty() &&
                             j1.substr(0, j1.find("\"timing\"")) == j2.substr(0, j2.find("\"timing\""));

    std::ostringstream out;
    out << "round trip " << (roundtrip ? "ok" : "FAILED") << ", 2x3 size " << (size54 ? "54" : "wrong")
        << ", exit codes " << codes << " (want 0012345), deterministic synth " << (synth_same ? "yes" : "no")
        << ", deterministic report " << (report_same ? "yes" : "no");
    return {roundtrip && size54 && exits && synth_same && report_same, out.str()};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "flux oracle equivalence", 10.0, flux_oracle},
        {2, "pde-loss identity", 1.0, pde_identity},
        {3, "finite-difference exactness and order", 1.0, findiff_order},
        {4, "spectral closure", 30.0, spectral_closure},
        {5, "statistical-metric oracle", 1.0, metric_oracle},
        {6, "gradient correctness", 60.0, gradient_check},
        {7, "regularization effect", 300.0, regularization},
        {8, "stepper physics", 10.0, stepper_physics},
        {9, "format and CLI contract", 5.0, format_contract},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("[%s] %d %s (%.2f s, limit %.0f s%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    c.limit_s, in_time ? "" : ", too slow", o.detail.c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
