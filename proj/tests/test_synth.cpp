#include <gtest/gtest.h>

#include <cmath>

#include "fluxdown/supergrid.hpp"
#include "fluxdown/synth.hpp"

using namespace fluxdown;

namespace {

double sum_of(const Grid2D& g) {
    double s = 0.0;
    for (double v : g.values()) s += v;
    return s;
}

double variance_of(const Grid2D& g) {
    const double m = g.mean();
    double s = 0.0;
    for (double v : g.values()) s += (v - m) * (v - m);
    return s / static_cast<double>(g.size());
}

}  // namespace

TEST(Synth, ConstantAndAffine) {
    const Grid2D c = gen_constant(3, 4, 288.15);
    for (double v : c.values()) EXPECT_EQ(v, 288.15);
    const Grid2D a = gen_affine(2, 3, 2.0, -1.0, 5.0, 0.5, 2.0);
    EXPECT_DOUBLE_EQ(a(0, 0), 2.0 * 0.25 - 1.0 * 1.0 + 5.0);
    EXPECT_DOUBLE_EQ(a(1, 2), 2.0 * 1.25 - 1.0 * 3.0 + 5.0);
    EXPECT_EQ(a.dx(), 0.5);
    EXPECT_EQ(a.dy(), 2.0);
    const Grid2D row = gen_affine(4, 4, 1.0, 0.0, 0.0);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(row(2, j), 0.5 + static_cast<double>(j));
    EXPECT_EQ(gen_affine(3, 5, 0.0, 0.0, 7.25), gen_constant(3, 5, 7.25));
}

TEST(Synth, GaussianBlobPeaksAtCentre) {
    const Grid2D g = gen_gaussian_blob(9, 9, 2.0, 1.5, 10.0);
    EXPECT_DOUBLE_EQ(g(4, 4), 12.0);
    EXPECT_DOUBLE_EQ(g(3, 4), g(5, 4));
    EXPECT_LT(g(0, 0), g(2, 2));
}

TEST(Synth, GrfDeterministicAndNormalised) {
    GrfSpec spec;
    spec.height = 32;
    spec.width = 48;
    spec.seed = 9;
    spec.amplitude = 2.5;
    const Grid2D a = gen_grf(spec);
    const Grid2D b = gen_grf(spec);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(variance_of(a)), 2.5, 1e-12);
    spec.seed = 10;
    EXPECT_NE(gen_grf(spec), a);
}

TEST(Synth, GrfSlopeClosure) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GrfSpec spec;
        spec.height = spec.width = 128;
        spec.seed = seed;
        mean += ralsd(gen_grf(spec)).alpha / 10.0;
    }
    EXPECT_NEAR(mean, -3.0, 0.15);
}

TEST(Synth, GrfRejectsBadSpecs) {
    GrfSpec spec;
    spec.target_slope = 0.5;
    EXPECT_THROW(gen_grf(spec), Error);
    spec.target_slope = -3.0;
    spec.amplitude = 0.0;
    EXPECT_THROW(gen_grf(spec), Error);
    spec.amplitude = 1.0;
    spec.height = 1;
    EXPECT_THROW(gen_grf(spec), Error);
}

TEST(AdvDiff, ZeroStepsIsIdentity) {
    GrfSpec g;
    g.height = g.width = 16;
    AdvDiffSpec spec{0.3, 0.2, 0.1, 1.0, 0, gen_grf(g)};
    EXPECT_EQ(step_advdiff(spec), spec.initial);
    const GridPair p = make_scenario(spec, 4);
    EXPECT_EQ(p.fine, spec.initial);
    EXPECT_EQ(p.coarse.height(), 4u);
}

TEST(AdvDiff, ConstantIsEquilibrium) {
    const Grid2D c = gen_constant(12, 10, 288.15);
    for (double d : {0.0, 0.05, 0.2}) EXPECT_EQ(step_advdiff({0.0, 0.0, d, 1.0, 25, c}), c);
}

TEST(AdvDiff, ScenarioLossIsWellFormed) {
    GrfSpec g;
    g.height = g.width = 32;
    Grid2D init = gen_grf(g);
    for (auto& v : init.values()) v += 288.15;
    const GridPair p = make_scenario({0.4, 0.2, 0.05, 1.0, 30, init}, 4);
    const double loss = pde_loss(p, p.fine).loss;
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GE(loss, 0.0);
}

TEST(AdvDiff, ConservesHeat) {
    GrfSpec g;
    g.height = g.width = 32;
    g.seed = 2;
    Grid2D init = gen_grf(g);
    for (auto& v : init.values()) v += 288.15;
    AdvDiffSpec spec{0.3, -0.2, 0.1, 1.0, 1000, init};
    const double before = sum_of(init);
    const double after = sum_of(step_advdiff(spec));
    EXPECT_NEAR(after, before, 1e-8 * std::abs(before));
}

TEST(AdvDiff, UnitCflIsExactShift) {
    GrfSpec g;
    g.height = 16;
    g.width = 20;
    const Grid2D init = gen_grf(g);
    AdvDiffSpec spec{1.0, 0.0, 0.0, 1.0, 3, init};
    const Grid2D out = step_advdiff(spec);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(out(i, j), init(i, (j + 20 - 3) % 20));
    spec = AdvDiffSpec{0.0, -1.0, 0.0, 1.0, 5, init};
    const Grid2D up = step_advdiff(spec);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(up(i, j), init((i + 5) % 16, j));
}

TEST(AdvDiff, DiffusionSmooths) {
    GrfSpec g;
    g.height = g.width = 32;
    AdvDiffSpec spec{0.0, 0.0, 0.2, 1.0, 50, gen_grf(g)};
    EXPECT_LT(variance_of(step_advdiff(spec)), variance_of(spec.initial));

    AdvDiffSpec blob{0.0, 0.0, 0.1, 1.0, 1, gen_gaussian_blob(24, 24, 5.0, 2.0, 280.0)};
    double prev = variance_of(blob.initial);
    for (int step = 0; step < 30; ++step) {
        blob.initial = step_advdiff(blob);
        const double v = variance_of(blob.initial);
        EXPECT_LT(v, prev) << "step " << step;
        prev = v;
    }
}

TEST(AdvDiff, RejectsUnstableStep) {
    AdvDiffSpec spec{0.8, 0.0, 0.2, 1.0, 1, gen_constant(8, 8, 1.0)};
    try {
        step_advdiff(spec);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::stability);
        EXPECT_NE(std::string(e.what()).find("advective CFL 0.8"), std::string::npos);
    }
    spec.diffusivity = -1.0;
    EXPECT_THROW(step_advdiff(spec), Error);
}

TEST(ScenarioConfig, ParsesKeys) {
    const ScenarioConfig cfg = parse_scenario_config(
        "# scenario\nheight = 32\nwidth=48\nux = 0.25 # east\nD = 0.05\n\nsteps = 10\nscale = 4\nseed = 7\n"
        "offset = 288.15\n");
    EXPECT_EQ(cfg.height, 32u);
    EXPECT_EQ(cfg.width, 48u);
    EXPECT_EQ(cfg.ux, 0.25);
    EXPECT_EQ(cfg.diffusivity, 0.05);
    EXPECT_EQ(cfg.steps, 10u);
    EXPECT_EQ(cfg.scale, 4u);
    EXPECT_EQ(cfg.seed, 7u);
    const AdvDiffSpec spec = build_advdiff_spec(cfg);
    EXPECT_NEAR(spec.initial.mean(), 288.15, 1e-9);
    EXPECT_EQ(spec.initial.width(), 48u);
}

TEST(ScenarioConfig, ReportsLine) {
    try {
        parse_scenario_config("height = 8\nspeed = 3\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(parse_scenario_config("steps = 2.5\n"), Error);
    EXPECT_THROW(parse_scenario_config("dt = abc\n"), Error);
    EXPECT_THROW(parse_scenario_config("dt\n"), Error);
}
