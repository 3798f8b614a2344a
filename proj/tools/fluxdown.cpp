#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>

#include "fluxdown/fluxdown.hpp"

namespace fd = fluxdown;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code(fd::ErrorKind kind) {
    switch (kind) {
        case fd::ErrorKind::io:
        case fd::ErrorKind::format:
        case fd::ErrorKind::parse: return 1;
        case fd::ErrorKind::invalid_argument:
        case fd::ErrorKind::stability: return 2;
        case fd::ErrorKind::dimension_mismatch: return 3;
        case fd::ErrorKind::degenerate:
        case fd::ErrorKind::too_small: return 4;
        case fd::ErrorKind::stall: return 5;
    }
    return 1;
}

bool is_csv(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".csv";
}

struct Input {
    fd::Grid2D grid;
    std::string path;
    std::string hash;
};

Input load_grid(const std::string& path, double dx, double dy) {
    const auto bytes = fd::detail::read_file_bytes(path);
    Input in;
    in.path = path;
    in.hash = fd::fnv1a_hex(bytes);
    try {
        in.grid = is_csv(path)
                      ? fd::parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), dx, dy)
                      : fd::parse_fgrd(bytes);
    } catch (const fd::Error& e) {
        throw fd::Error(e.kind(), path + ": " + e.what());
    }
    return in;
}

void save_grid(const fd::Grid2D& g, const std::string& path) {
    if (is_csv(path)) fd::write_csv(g, path);
    else fd::write_fgrd(g, path);
}

std::string num(double v) { return fd::detail::format_double(v); }

double stddev(const fd::Grid2D& g) {
    const double m = g.mean();
    double s = 0.0;
    for (double v : g.values()) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(g.size()));
}

void print_summary(const char* label, const fd::Grid2D& g, const std::string& path) {
    std::cout << label << ": " << g.height() << "x" << g.width() << " mean=" << num(g.mean())
              << " std=" << num(stddev(g)) << " -> " << path << "\n";
}

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct FluxFlags {
    double eps = fd::default_eps;
    std::size_t cell_h = 0;
    std::size_t cell_w = 0;
    bool anomaly = false;
    std::string aggregation = "same_tiling";

    void add(CLI::App* app) {
        app->add_option("--eps", eps, "Gradient and ratio stabiliser")->check(CLI::PositiveNumber);
        app->add_option("--cell-h", cell_h, "Supergrid cell height in coarse pixels (0: automatic)");
        app->add_option("--cell-w", cell_w, "Supergrid cell width in coarse pixels (0: automatic)");
        app->add_flag("--anomaly", anomaly, "Subtract the per-cell mean before the advective sum");
        app->add_option("--aggregation", aggregation, "Fine-grid aggregation")
            ->check(CLI::IsMember({"same_tiling", "coarsen_first"}));
    }

    fd::FluxOptions options() const {
        if ((cell_h == 0) != (cell_w == 0)) throw UsageError("--cell-h and --cell-w must be given together");
        fd::FluxOptions o;
        o.grad_eps = eps;
        o.ratio_eps = eps;
        o.anomaly = anomaly;
        o.aggregation = aggregation == "coarsen_first" ? fd::FineAggregation::coarsen_first
                                                       : fd::FineAggregation::same_tiling;
        if (cell_h > 0) o.cell_override = fd::CellSize{cell_h, cell_w};
        return o;
    }
};

struct SpectralFlags {
    std::optional<double> fit_lo;
    std::optional<double> fit_hi;
    std::string window = "none";

    void add(CLI::App* app) {
        app->add_option("--fit-lo", fit_lo, "Lowest wavenumber in the slope fit (default 4)");
        app->add_option("--fit-hi", fit_hi, "Highest wavenumber in the slope fit (default min(H,W)/4)");
        app->add_option("--window", window, "Taper before the transform")->check(CLI::IsMember({"none", "hann"}));
    }

    fd::Window win() const { return window == "hann" ? fd::Window::hann : fd::Window::none; }

    fd::SpectrumProfile fitted(const fd::Grid2D& g, const char* label) const {
        try {
            fd::SpectrumProfile prof = fd::radial_profile(fd::power_spectrum_2d(g, win()));
            const double lo = fit_lo.value_or(4.0);
            const double hi = fit_hi.value_or(0.25 * static_cast<double>(std::min(g.height(), g.width())));
            fd::FitRange r;
            try {
                r = fd::fit_range_for_k(prof, lo, hi);
            } catch (const fd::Error&) {
                if (fit_lo || fit_hi) throw UsageError("--fit-lo/--fit-hi select fewer than 4 spectral bins");
                throw;
            }
            const fd::SlopeFit fit = fd::fit_slope(prof, r.lo, r.hi);
            prof.fitted = true;
            prof.alpha = fit.alpha;
            prof.intercept = fit.intercept;
            prof.fit_lo = r.lo;
            prof.fit_hi = r.hi;
            return prof;
        } catch (const fd::Error& e) {
            throw fd::Error(e.kind(), std::string(label) + " grid: " + e.what());
        }
    }
};

struct GridFlags {
    double dx = 1.0;
    double dy = 1.0;

    void add(CLI::App* app) {
        app->add_option("--dx", dx, "x spacing for CSV inputs and generated grids")->check(CLI::PositiveNumber);
        app->add_option("--dy", dy, "y spacing for CSV inputs and generated grids")->check(CLI::PositiveNumber);
    }
};

// synth

struct SynthArgs {
    std::string kind;
    std::size_t h = 64;
    std::size_t w = 64;
    std::uint64_t seed = 0;
    double slope = -3.0;
    double amplitude = 1.0;
    double offset = 0.0;
    double a = 0.0, b = 0.0, c = 0.0;
    double ux = 0.0, uy = 0.0, diff = 0.0, dt = 1.0;
    std::size_t steps = 0;
    std::size_t scale = 2;
    std::string config;
    std::string out_fine;
    std::string out_coarse;
    GridFlags grid;
};

int run_synth(const SynthArgs& s, CLI::App* app) {
    auto given = [app](const char* name) { return app->count(name) > 0; };
    const std::map<std::string, std::vector<const char*>> allowed{
        {"grf", {"--seed", "--slope", "--amplitude", "--offset"}},
        {"affine", {"--a", "--b", "--c"}},
        {"advdiff",
         {"--seed", "--slope", "--amplitude", "--offset", "--ux", "--uy", "--D", "--dt", "--steps", "--config"}},
    };
    for (const char* opt : {"--seed", "--slope", "--amplitude", "--offset", "--a", "--b", "--c", "--ux", "--uy", "--D",
                            "--dt", "--steps", "--config"}) {
        const auto& ok = allowed.at(s.kind);
        if (given(opt) && std::find(ok.begin(), ok.end(), std::string_view(opt)) == ok.end()) {
            throw UsageError(std::string(opt) + " does not apply to 'synth " + s.kind + "'");
        }
    }

    fd::Grid2D fine;
    std::size_t scale = s.scale;
    if (s.kind == "grf") {
        fd::GrfSpec spec{s.h, s.w, s.slope, s.seed, s.amplitude, s.grid.dx, s.grid.dy};
        fine = fd::gen_grf(spec);
        for (auto& v : fine.values()) v += s.offset;
    } else if (s.kind == "affine") {
        fine = fd::gen_affine(s.h, s.w, s.a, s.b, s.c, s.grid.dx, s.grid.dy);
    } else {
        fd::ScenarioConfig cfg;
        cfg.height = s.h;
        cfg.width = s.w;
        if (!s.config.empty()) {
            const auto bytes = fd::detail::read_file_bytes(s.config);
            try {
                cfg = fd::parse_scenario_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
            } catch (const fd::Error& e) {
                throw fd::Error(e.kind(), s.config + ": " + e.what());
            }
        }
        if (s.config.empty() || given("--h")) cfg.height = s.h;
        if (s.config.empty() || given("--w")) cfg.width = s.w;
        if (s.config.empty() || given("--dx")) cfg.dx = s.grid.dx;
        if (s.config.empty() || given("--dy")) cfg.dy = s.grid.dy;
        if (s.config.empty() || given("--seed")) cfg.seed = s.seed;
        if (s.config.empty() || given("--slope")) cfg.slope = s.slope;
        if (s.config.empty() || given("--amplitude")) cfg.amplitude = s.amplitude;
        if (s.config.empty() || given("--offset")) cfg.offset = s.offset;
        if (s.config.empty() || given("--ux")) cfg.ux = s.ux;
        if (s.config.empty() || given("--uy")) cfg.uy = s.uy;
        if (s.config.empty() || given("--D")) cfg.diffusivity = s.diff;
        if (s.config.empty() || given("--dt")) cfg.dt = s.dt;
        if (s.config.empty() || given("--steps")) cfg.steps = s.steps;
        if (s.config.empty() || given("--scale")) cfg.scale = s.scale;
        scale = cfg.scale;
        fine = fd::step_advdiff(fd::build_advdiff_spec(cfg));
    }

    if (scale == 0 || fine.height() % scale != 0 || fine.width() % scale != 0) {
        throw UsageError("--scale " + std::to_string(scale) + " does not divide the " + fd::shape_string(fine) +
                         " grid");
    }
    save_grid(fine, s.out_fine);
    print_summary("fine", fine, s.out_fine);
    if (!s.out_coarse.empty()) {
        const fd::Grid2D coarse = fd::coarsen_block_mean(fine, scale, scale);
        save_grid(coarse, s.out_coarse);
        print_summary("coarse", coarse, s.out_coarse);
    }
    return 0;
}

// metrics

struct MetricsArgs {
    std::string pred, truth, coarse, report_json;
    std::string spec_ref = "coarse";
    FluxFlags flux;
    SpectralFlags spectral;
    GridFlags grid;
};

json summary_json(const std::vector<double>& v) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum += x;
    }
    return json{{"min", lo}, {"max", hi}, {"mean", sum / static_cast<double>(v.size())}};
}

int run_metrics(const MetricsArgs& m) {
    Stopwatch clock;
    json timing;
    const Input pred = load_grid(m.pred, m.grid.dx, m.grid.dy);
    const Input truth = load_grid(m.truth, m.grid.dx, m.grid.dy);
    std::optional<Input> coarse;
    if (!m.coarse.empty()) coarse = load_grid(m.coarse, m.grid.dx, m.grid.dy);
    timing["load"] = clock.lap();

    json doc;
    doc["tool_version"] = fd::version;
    json inputs;
    inputs["pred"] = {{"path", pred.path}, {"fnv1a64", pred.hash}};
    inputs["truth"] = {{"path", truth.path}, {"fnv1a64", truth.hash}};
    if (coarse) inputs["coarse"] = {{"path", coarse->path}, {"fnv1a64", coarse->hash}};
    doc["inputs"] = inputs;

    fd::MetricReport rep = fd::compute_metrics(pred.grid, truth.grid);
    timing["statistics"] = clock.lap();

    std::ostringstream text;
    text << "fluxdown " << fd::version << " metrics\n";
    text << "pred    " << pred.path << " (" << pred.grid.height() << "x" << pred.grid.width() << ")\n";
    text << "truth   " << truth.path << "\n";
    if (coarse) text << "coarse  " << coarse->path << " (" << coarse->grid.height() << "x" << coarse->grid.width() << ")\n";
    text << "n       " << rep.n << "\n";
    text << "rmse    " << num(rep.rmse) << "\n";
    text << "r2      " << num(rep.r2) << "\n";
    text << "pcc     " << num(rep.pcc) << "\n";
    text << "bias    " << num(rep.bias) << "\n";

    json flux_doc;
    json spec_doc;
    if (coarse) {
        const fd::FluxOptions opts = m.flux.options();
        const std::size_t sy = coarse->grid.height() == 0 ? 0 : pred.grid.height() / coarse->grid.height();
        const std::size_t sx = coarse->grid.width() == 0 ? 0 : pred.grid.width() / coarse->grid.width();
        fd::require_fine_shape(coarse->grid, pred.grid, sy, sx);
        const fd::PdeLossResult pl = fd::pde_loss(coarse->grid, pred.grid, sy, sx, opts);
        rep.l_flux = pl.loss;
        flux_doc["l_flux"] = pl.loss;
        flux_doc["supergrid_cell"] = {pl.coarse_cell.h, pl.coarse_cell.w};
        flux_doc["n_cells"] = pl.n_cells;
        flux_doc["r_eff_pred"] = summary_json(pl.fine.r_eff);
        flux_doc["r_eff_coarse"] = summary_json(pl.coarse.r_eff);
        timing["flux"] = clock.lap();

        const fd::Grid2D ref = m.spec_ref == "truth" ? truth.grid : fd::upsample_quadratic(coarse->grid, sy, sx);
        const fd::SpectrumProfile pf = m.spectral.fitted(pred.grid, "pred");
        const fd::SpectrumProfile pc = m.spectral.fitted(ref, "ref");
        rep.l_spec = std::abs(pf.alpha - pc.alpha);
        spec_doc["alpha_f"] = pf.alpha;
        spec_doc["alpha_c"] = pc.alpha;
        spec_doc["l_spec"] = *rep.l_spec;
        spec_doc["reference"] = m.spec_ref == "truth" ? "truth" : "upsampled_coarse";
        spec_doc["fit_k"] = {pf.k_bins[pf.fit_lo], pf.k_bins[pf.fit_hi]};
        spec_doc["window"] = m.spectral.window;
        timing["spectral"] = clock.lap();

        text << "l_flux  " << num(*rep.l_flux) << "\n";
        text << "r_eff   pred min=" << num(flux_doc["r_eff_pred"]["min"].get<double>())
             << " max=" << num(flux_doc["r_eff_pred"]["max"].get<double>())
             << " mean=" << num(flux_doc["r_eff_pred"]["mean"].get<double>()) << " over " << pl.n_cells << " cells\n";
        text << "alpha_f " << num(pf.alpha) << "\n";
        text << "alpha_c " << num(pc.alpha) << " (" << spec_doc["reference"].get<std::string>() << ")\n";
        text << "l_spec  " << num(*rep.l_spec) << "\n";
        text << "fit k   [" << num(pf.k_bins[pf.fit_lo]) << ", " << num(pf.k_bins[pf.fit_hi]) << "]\n";
    }

    json metrics_doc{{"rmse", rep.rmse}, {"r2", rep.r2}, {"pcc", rep.pcc}, {"bias", rep.bias}, {"n", rep.n}};
    if (rep.l_flux) metrics_doc["l_flux"] = *rep.l_flux;
    if (rep.l_spec) metrics_doc["l_spec"] = *rep.l_spec;
    doc["metrics"] = metrics_doc;
    if (coarse) {
        doc["flux"] = flux_doc;
        doc["spectral"] = spec_doc;
    }
    doc["timing"] = timing;

    if (!m.report_json.empty()) fd::detail::write_text_file(m.report_json, doc.dump(2) + "\n");
    std::cout << text.str();
    return 0;
}

// refine

struct RefineArgs {
    std::string init, coarse, out, trace;
    double lambda = 1.0;
    std::size_t iters = 100;
    double step = fd::RefineConfig{}.step_size;
    std::string grad_mode = "analytic";
    double tol = 0.0;
    double fd_h = 1e-6;
    bool no_normalize = false;
    FluxFlags flux;
    GridFlags grid;
};

void print_terms(const char* label, const fd::RefineTrace& t, std::size_t k) {
    std::cout << label << " objective=" << num(t.objective[k]) << " fidelity=" << num(t.fidelity[k])
              << " pde=" << num(t.pde[k]) << "\n";
}

int run_refine(const RefineArgs& r) {
    if (r.lambda < 0.0) throw UsageError("--lambda must be non-negative");
    const Input init = load_grid(r.init, r.grid.dx, r.grid.dy);
    const Input coarse = load_grid(r.coarse, r.grid.dx, r.grid.dy);
    fd::RefineConfig cfg;
    cfg.lambda_pde = r.lambda;
    cfg.max_iters = r.iters;
    cfg.step_size = r.step;
    cfg.grad_mode = r.grad_mode == "numeric" ? fd::GradMode::numeric_central : fd::GradMode::analytic;
    cfg.tol = r.tol;
    cfg.fd_h = r.fd_h;
    cfg.normalize = !r.no_normalize;
    cfg.flux = r.flux.options();
    const std::string trace_path = r.trace.empty() ? r.out + ".trace.csv" : r.trace;

    auto finish = [&](const fd::RefineTrace& t) {
        save_grid(t.final_field, r.out);
        fd::write_trace_csv(t, trace_path);
        print_terms("initial", t, 0);
        print_terms("final  ", t, t.objective.size() - 1);
        std::cout << "iterations " << t.iters_run << "\n";
        std::cout << "wrote " << r.out << " and " << trace_path << "\n";
    };
    try {
        finish(fd::refine(init.grid, coarse.grid, cfg));
    } catch (const fd::RefineStall& e) {
        finish(e.trace());
        throw;
    }
    return 0;
}

// ralsd

struct RalsdArgs {
    std::string in, out_profile;
    SpectralFlags spectral;
    GridFlags grid;
};

int run_ralsd(const RalsdArgs& a) {
    const Input in = load_grid(a.in, a.grid.dx, a.grid.dy);
    const fd::SpectrumProfile p = a.spectral.fitted(in.grid, "input");
    if (!a.out_profile.empty()) fd::write_profile(p, a.out_profile);
    std::cout << "alpha " << num(p.alpha) << "\n";
    std::cout << "fit k [" << num(p.k_bins[p.fit_lo]) << ", " << num(p.k_bins[p.fit_hi]) << "] over "
              << p.fit_hi - p.fit_lo + 1 << " bins\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-aware evaluation and refinement of gridded temperature fields"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);
    app.set_version_flag("--version", fd::version);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic fine and coarse grids");
    synth_cmd->add_option("kind", synth.kind, "grf | affine | advdiff")
        ->required()
        ->check(CLI::IsMember({"grf", "affine", "advdiff"}));
    synth_cmd->add_option("--h", synth.h, "Fine grid height")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--w", synth.w, "Fine grid width")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed, "Random seed");
    synth_cmd->add_option("--slope", synth.slope, "Target spectral slope (negative)");
    synth_cmd->add_option("--amplitude", synth.amplitude, "Standard deviation of the random field");
    synth_cmd->add_option("--offset", synth.offset, "Constant added to the random field");
    synth_cmd->add_option("--a", synth.a, "Affine x coefficient");
    synth_cmd->add_option("--b", synth.b, "Affine y coefficient");
    synth_cmd->add_option("--c", synth.c, "Affine constant");
    synth_cmd->add_option("--ux", synth.ux, "Advection velocity along x");
    synth_cmd->add_option("--uy", synth.uy, "Advection velocity along y");
    synth_cmd->add_option("--D", synth.diff, "Diffusivity");
    synth_cmd->add_option("--dt", synth.dt, "Time step");
    synth_cmd->add_option("--steps", synth.steps, "Number of time steps");
    synth_cmd->add_option("--config", synth.config, "Scenario file (key = value lines)");
    synth_cmd->add_option("--scale", synth.scale, "Coarsening factor for --out-coarse");
    synth_cmd->add_option("--out-fine", synth.out_fine, "Fine grid output (.fgrd or .csv)")->required();
    synth_cmd->add_option("--out-coarse", synth.out_coarse, "Coarse grid output (.fgrd or .csv)");
    synth.grid.add(synth_cmd);

    MetricsArgs metrics;
    auto* metrics_cmd = app.add_subcommand("metrics", "Score a prediction against truth");
    metrics_cmd->add_option("--pred", metrics.pred, "Predicted fine grid")->required();
    metrics_cmd->add_option("--truth", metrics.truth, "Reference fine grid")->required();
    metrics_cmd->add_option("--coarse", metrics.coarse, "Coarse input grid; enables the physics metrics");
    metrics_cmd->add_option("--spec-ref", metrics.spec_ref, "Spectral reference field")
        ->check(CLI::IsMember({"coarse", "truth"}));
    metrics_cmd->add_option("--report-json", metrics.report_json, "Write the report document here");
    metrics.flux.add(metrics_cmd);
    metrics.spectral.add(metrics_cmd);
    metrics.grid.add(metrics_cmd);

    RefineArgs refine;
    auto* refine_cmd = app.add_subcommand("refine", "Refine a fine field with the physics loss as regulariser");
    refine_cmd->add_option("--init", refine.init, "Initial fine grid")->required();
    refine_cmd->add_option("--coarse", refine.coarse, "Coarse grid")->required();
    refine_cmd->add_option("--out", refine.out, "Refined grid output")->required();
    refine_cmd->add_option("--trace", refine.trace, "Trace CSV output (default: <out>.trace.csv)");
    refine_cmd->add_option("--lambda", refine.lambda, "Weight of the physics term");
    refine_cmd->add_option("--iters", refine.iters, "Maximum iterations")->check(CLI::PositiveNumber);
    refine_cmd->add_option("--step", refine.step, "Initial step size")->check(CLI::PositiveNumber);
    refine_cmd->add_option("--grad-mode", refine.grad_mode, "Gradient evaluation")
        ->check(CLI::IsMember({"analytic", "numeric"}));
    refine_cmd->add_option("--tol", refine.tol, "Stop below this relative decrease");
    refine_cmd->add_option("--fd-h", refine.fd_h, "Numeric gradient step")->check(CLI::PositiveNumber);
    refine_cmd->add_flag("--no-normalize", refine.no_normalize, "Use the raw fidelity and physics terms");
    refine.flux.add(refine_cmd);
    refine.grid.add(refine_cmd);

    RalsdArgs ralsd;
    auto* ralsd_cmd = app.add_subcommand("ralsd", "Radially averaged spectrum and slope of one grid");
    ralsd_cmd->add_option("--in", ralsd.in, "Input grid")->required();
    ralsd_cmd->add_option("--out-profile", ralsd.out_profile, "Two-column k psi output");
    ralsd.spectral.add(ralsd_cmd);
    ralsd.grid.add(ralsd_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    try {
        if (cmd == synth_cmd) return run_synth(synth, synth_cmd);
        if (cmd == metrics_cmd) return run_metrics(metrics);
        if (cmd == refine_cmd) return run_refine(refine);
        return run_ralsd(ralsd);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << cmd->help();
        return 2;
    } catch (const fd::Error& e) {
        std::cerr << "error (" << fd::to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    }
}
