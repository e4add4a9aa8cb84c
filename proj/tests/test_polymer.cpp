#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "torus_kpz/polymer.hpp"
#include "torus_kpz/she.hpp"
#include "torus_kpz/stats.hpp"

using namespace torus_kpz;

namespace {

DensityField random_density(const TorusGrid& g, std::uint64_t seed) {
    CounterRng rng(seed, 2);
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = 0.1 + rng.uniform(0, i);
    return normalize_to_density(f).density;
}

DensityField cosine_density(const TorusGrid& g, double a) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i)
        f.values[i] =
            1.0 + a * std::cos(2.0 * M_PI * static_cast<double>(i) * g.spacing());
    return DensityField::certify(std::move(f));
}

}  // namespace

TEST_CASE("drift A: fixed point, analytic expansion, mass neutrality") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const TorusGrid g(1, 64);
    const PolymerOps ops(spec, g);

    // uniform is a drift fixed point
    const Field a1 = ops.drift_A(DensityField::uniform(g));
    CHECK(sup_norm(a1) < 1e-12);

    // u = 1 + a cos(2 pi x):
    //   A(u) = a (-2 pi^2 - r_1 + a^2 r_1 / 2) cos(2 pi x)
    //          - (a^2 r_1 / 2) cos(4 pi x)
    // (derived by expanding R*u and the quadratic terms in the Fourier basis)
    const double a = 0.3, r1 = 0.5;
    const Field au = ops.drift_A(cosine_density(g, a));
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = static_cast<double>(i) * g.spacing();
        const double expected =
            a * (-2.0 * M_PI * M_PI - r1 + 0.5 * a * a * r1) * std::cos(2.0 * M_PI * x) -
            0.5 * a * a * r1 * std::cos(4.0 * M_PI * x);
        dev = std::max(dev, std::abs(au.values[i] - expected));
    }
    CHECK(dev < 1e-8);

    for (std::uint64_t s = 0; s < 100; ++s)
        CHECK(std::abs(integrate(ops.drift_A(random_density(g, s)))) < 1e-10);

    CHECK_THROWS_AS(PolymerOps(CovarianceSpec::white1d(), g), Unsupported);
}

TEST_CASE("diffusion B: uniform cases, zero mean, band errors") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const TorusGrid g(1, 64);
    const PolymerOps ops(spec, g);
    const DensityField one = DensityField::uniform(g);

    const auto [re0, im0] = ops.diffusion_B(one, {0});
    CHECK(sup_norm(re0) < 1e-13);
    CHECK(sup_norm(im0) < 1e-13);

    // B_k(1) = e_k for k != 0
    for (int k : {1, 2, -1, -2}) {
        const auto [re, im] = ops.diffusion_B(one, {k});
        const double sr = std::sqrt(std::abs(k) == 1 ? 0.5 : 0.25);
        double dev = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = static_cast<double>(i) * g.spacing();
            dev = std::max(dev, std::abs(re.values[i] - sr * std::cos(2.0 * M_PI * k * x)));
            dev = std::max(dev, std::abs(im.values[i] - sr * std::sin(2.0 * M_PI * k * x)));
        }
        CHECK(dev < 1e-12);
    }

    for (std::uint64_t s = 0; s < 30; ++s) {
        const DensityField u = random_density(g, 1000 + s);
        for (int k : {0, 1, 2}) {
            const auto [re, im] = ops.diffusion_B(u, {k});
            CHECK(std::abs(integrate(re)) < 1e-12);
            CHECK(std::abs(integrate(im)) < 1e-12);
        }
    }

    CHECK_THROWS_AS(ops.diffusion_B(one, {5}), FrequencyOutOfBand);
}

TEST_CASE("direct stepper: stability guard, uniform stays uniform") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const TorusGrid coarse(1, 16);
    const PolymerOps ops(spec, coarse);
    const ModeTable table(spec, coarse);
    NoisePath path(1, 0);

    // explicit 1/2-Laplacian step is unstable at n = 64, dt = 1e-3
    const PolymerOps ops64(spec, TorusGrid(1, 64));
    const ModeTable table64(spec, TorusGrid(1, 64));
    const NoiseIncrement inc64 = path.increment_at(table64, 1e-3, 0);
    CHECK_THROWS_AS(ops64.step(DensityField::uniform(TorusGrid(1, 64)), 1e-3, inc64),
                    ConfigError);

    // zero noise: uniform is a fixed point, mass drift at rounding level
    const ModeTable none_table(CovarianceSpec::none_spec(1), coarse);
    NoisePath zero_path(2, 0);
    const NoiseIncrement zinc = zero_path.increment_at(table, 1e-3, 0);
    NoiseIncrement zeroed = zinc;
    for (double& v : zeroed.dW.values) v = 0.0;
    for (double& v : zeroed.pair_a) v = 0.0;
    for (double& v : zeroed.pair_b) v = 0.0;
    const auto res = ops.step(DensityField::uniform(coarse), 1e-3, zeroed);
    CHECK(res.mass_drift < 1e-12);
    for (double v : res.density.values()) CHECK(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("direct stepper: per-step mass drift stays at rounding level") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const TorusGrid g(1, 16);
    const PolymerOps ops(spec, g);
    const ModeTable table(spec, g);
    NoisePath path(3, 0);
    DensityField u = random_density(g, 12);
    double worst = 0.0;
    for (int j = 0; j < 1000; ++j) {
        const NoiseIncrement inc = path.increment_at(table, 1e-3, j);
        auto res = ops.step(u, 1e-3, inc);
        worst = std::max(worst, res.mass_drift);
        u = std::move(res.density);
    }
    CHECK(worst <= 1e-6);  // measured: quadrature-exact up to rounding
}

TEST_CASE("scheme consistency: direct SPDE vs normalize-after-SHE") {
    // same noise, both routes solve the same equation; their sup distance at
    // t=1 shrinks roughly first order in dt at this grid
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    auto sup_dist = [&](double dt) {
        const TorusGrid g(1, 16);
        SchemeConfig cfg;
        cfg.grid = g;
        cfg.dt = dt;
        cfg.scheme = Scheme::exp_euler_multiplicative;
        const PolymerOps ops(spec, g);
        std::vector<double> ds;
        for (std::uint64_t r = 0; r < 40; ++r) {
            SheStepper stepper(spec, cfg);
            NoisePath path(31415, r);
            SheState she = SheState::from(DensityField::uniform(g));
            DensityField em = DensityField::uniform(g);
            const auto n = detail::steps_for(1.0, dt, "t");
            for (std::uint64_t j = 0; j < n; ++j) {
                const NoiseIncrement inc = path.increment_at(stepper.table(), dt, j);
                stepper.step(she, inc);
                em = ops.step(em, dt, inc).density;
            }
            double d = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                d = std::max(d, std::abs(she.density.values()[i] - em.values()[i]));
            ds.push_back(d);
        }
        return mean_of(ds);
    };
    const double d1 = sup_dist(1e-3);
    const double d2 = sup_dist(5e-4);
    CHECK(d1 / d2 > 1.5);
    CHECK(d1 / d2 < 2.5);
}

TEST_CASE("operator norms stay bounded along a run") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    SchemeConfig cfg;
    cfg.grid = TorusGrid(1, 32);
    cfg.dt = 1e-3;
    cfg.scheme = Scheme::exp_euler_multiplicative;
    const PolymerOps ops(spec, cfg.grid);
    SheStepper stepper(spec, cfg);
    NoisePath path(9, 0);
    SheState state = SheState::from(DensityField::uniform(cfg.grid));
    double max_A = 0.0, max_B2 = 0.0;
    for (int j = 0; j < 2000; ++j) {
        stepper.step(state, path);
        if (j % 100 != 0) continue;
        max_A = std::max(max_A, std::sqrt(l2_norm_sq(ops.drift_A(state.density))));
        double b2 = 0.0;
        for (int k : {0, 1, 2, -1, -2}) {
            const auto [re, im] = ops.diffusion_B(state.density, {k});
            b2 += l2_norm_sq(re) + l2_norm_sq(im);
        }
        max_B2 = std::max(max_B2, b2);
    }
    CHECK(std::isfinite(max_A));
    CHECK(std::isfinite(max_B2));
    CHECK(max_A < 1e4);
    CHECK(max_B2 < 1e3);
}
