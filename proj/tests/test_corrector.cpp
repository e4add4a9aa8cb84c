#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "torus_kpz/corrector.hpp"

using namespace torus_kpz;

namespace {

SchemeConfig smooth_cfg(int n, double dt) {
    SchemeConfig cfg;
    cfg.grid = TorusGrid(1, n);
    cfg.dt = dt;
    cfg.scheme = Scheme::exp_euler_multiplicative;
    return cfg;
}

const CovarianceSpec kFlat = CovarianceSpec::smooth(1, {{{0}, 1.0}});

DensityField cosine_density(const TorusGrid& g, double a) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i)
        f.values[i] =
            1.0 + a * std::cos(2.0 * M_PI * static_cast<double>(i) * g.spacing());
    return DensityField::certify(std::move(f));
}

}  // namespace

TEST_CASE("gamma: closed-form case and lower bound") {
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    // r_0-only: R(u) = 1 pointwise, so gamma = 1/2 exactly with zero spread
    const GammaEstimate g = estimate_gamma(kFlat, cfg, 3, 0.5, 4.0);
    CHECK(g.gamma == Catch::Approx(0.5).margin(1e-12));
    CHECK(g.stderr_ < 1e-12);

    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const GammaEstimate gd = estimate_gamma(spec, cfg, 3, 1.0, 30.0);
    CHECK(gd.gamma >= 0.5);
    CHECK(gd.gamma < 0.52);  // weak-noise regime sits just above 1/2
    CHECK(gd.gamma >= 0.5 - 3.0 * gd.stderr_);

    // reproducibility between independent seeds
    const GammaEstimate g2 = estimate_gamma(spec, cfg, 1234, 1.0, 30.0);
    CHECK(std::abs(gd.gamma - g2.gamma) <
          3.0 * std::sqrt(gd.stderr_ * gd.stderr_ + g2.stderr_ * g2.stderr_) + 1e-4);

    CHECK_THROWS_AS(estimate_gamma(spec, cfg, 1, 1.0, 1.01), InsufficientSamples);
}

TEST_CASE("gamma: white-noise stability across seeds") {
    const CovarianceSpec white = CovarianceSpec::white1d();
    SchemeConfig cfg;
    cfg.grid = TorusGrid(1, 128);
    cfg.dt = 0.25 * cfg.grid.spacing() * cfg.grid.spacing();
    cfg.scheme = Scheme::fd_euler_white;
    const GammaEstimate a = estimate_gamma(white, cfg, 10, 1.0, 31.0);
    const GammaEstimate b = estimate_gamma(white, cfg, 20, 1.0, 31.0);
    CHECK(a.gamma >= 0.5);
    CHECK(std::abs(a.gamma - b.gamma) / a.gamma < 0.02);
}

TEST_CASE("PtR tilde: t = 0 value and the degenerate covariance") {
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const DensityField one = DensityField::uniform(cfg.grid);
    const GammaEstimate g = estimate_gamma(kFlat, cfg, 3, 0.5, 4.0);
    // t = 0: returns R(1) - 2 gamma = 1 - 2 gamma
    const ValueWithError v0 = estimate_PtR_tilde(one, 0.0, 8, kFlat, cfg, 5, g.gamma);
    CHECK(v0.value == Catch::Approx(1.0 - 2.0 * g.gamma).margin(1e-12));
    // r_0-only: identically zero at every t
    const ValueWithError v1 = estimate_PtR_tilde(one, 0.2, 8, kFlat, cfg, 5, g.gamma);
    CHECK(std::abs(v1.value) < 1e-12);
    CHECK(v1.stderr_ < 1e-12);
}

TEST_CASE("PtR tilde: coupled estimator agrees with the plain one where both resolve") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const DensityField one = DensityField::uniform(cfg.grid);
    const GammaEstimate g = estimate_gamma(spec, cfg, 97, 1.0, 41.0);
    const double t = 0.05;
    const ValueWithError plain =
        estimate_PtR_tilde(one, t, 3000, spec, cfg, 11, g.gamma);
    const auto coupled =
        estimate_PtR_tilde_coupled(one, {t}, 48, spec, cfg, 13, /*burn_in=*/1.5);
    const double tol = 3.0 * std::sqrt(plain.stderr_ * plain.stderr_ +
                                       coupled[0].stderr_ * coupled[0].stderr_ +
                                       g.stderr_ * g.stderr_ * 4.0);
    CHECK(std::abs(plain.value - coupled[0].value) < tol);
    CHECK(coupled[0].value < 0.0);  // R grows from uniform toward stationarity
}

TEST_CASE("PtR tilde: coupled estimator resolves the exponential tail") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const DensityField one = DensityField::uniform(cfg.grid);
    const auto vals =
        estimate_PtR_tilde_coupled(one, {0.5, 1.0, 2.0}, 24, spec, cfg, 7, 1.5);
    REQUIRE(vals.size() == 3);
    // relative error stays O(1/sqrt(n_mc)) while the scale collapses
    CHECK(std::abs(vals[1].value) < std::abs(vals[0].value) / 5.0);
    CHECK(std::abs(vals[2].value) < std::abs(vals[1].value) / 5.0);
    CHECK(std::abs(vals[2].value) > 0.0);
}

TEST_CASE("chi: degenerate covariance and self-consistency in T") {
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const DensityField one = DensityField::uniform(cfg.grid);
    const GammaEstimate gflat = estimate_gamma(kFlat, cfg, 3, 0.5, 4.0);
    const CorrectorEstimate c0 =
        estimate_chi(one, 0.5, 8, 0.05, kFlat, cfg, 5, gflat);
    CHECK(std::abs(c0.chi) < 1e-11);
    CHECK(c0.stderr_ < 1e-11);

    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const GammaEstimate g = estimate_gamma(spec, cfg, 97, 1.0, 41.0);
    const CorrectorEstimate cT =
        estimate_chi(one, 0.5, 64, 0.05, spec, cfg, 21, g);
    const CorrectorEstimate c2T =
        estimate_chi(one, 1.0, 64, 0.05, spec, cfg, 21, g);
    const double tol = 3.0 * (cT.stderr_ + c2T.stderr_) + cT.gamma_bias + c2T.gamma_bias;
    CHECK(std::abs(c2T.chi - cT.chi) < tol);
    CHECK(cT.profile_t.size() == 11);
    CHECK(cT.profile_value[0] == Catch::Approx(1.0 - 2.0 * g.gamma).margin(1e-6));
}

TEST_CASE("chi: bounded by the sup-norm envelope") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const GammaEstimate g = estimate_gamma(spec, cfg, 97, 1.0, 41.0);
    for (double a : {0.0, 0.4, 0.8}) {
        const DensityField v = cosine_density(cfg.grid, a);
        const CorrectorEstimate c = estimate_chi(v, 0.5, 24, 0.05, spec, cfg, 31, g);
        const double env = 1.0 + max_value(v.field);
        CHECK(std::abs(c.chi) < env);  // generous envelope, C = 1 suffices here
    }
}

TEST_CASE("Dchi: degenerate covariance gives the zero field") {
    const SchemeConfig cfg = smooth_cfg(32, 2e-3);
    const DensityField one = DensityField::uniform(cfg.grid);
    const GradientEstimate g = estimate_Dchi(one, 0.25, 3, kFlat, cfg, 5);
    CHECK(sup_norm(g.dchi) < 1e-11);
    CHECK(std::abs(g.orth_value) < 1e-12);
}

TEST_CASE("Dchi: orthogonality <v, Dchi(v)> = 0") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    for (double a : {0.0, 0.5}) {
        const DensityField v = cosine_density(cfg.grid, a);
        const GradientEstimate g = estimate_Dchi(v, 0.5, 4, spec, cfg, 17);
        CHECK(std::abs(g.orth_value) <= 3.0 * g.orth_stderr + 1e-9);
        CHECK(sup_norm(g.dchi) < 1.0);  // weak-noise gradient is small
    }
    CHECK_THROWS_AS(estimate_Dchi(DensityField::uniform(TorusGrid(1, 256)), 0.5, 4,
                                  spec, smooth_cfg(256, 1e-3), 1),
                    CostGuard);
}

TEST_CASE("Dchi: finite-difference cross-check, path by path") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const DensityField v = DensityField::uniform(cfg.grid);
    Field h(cfg.grid);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.values[i] = std::cos(2.0 * M_PI * static_cast<double>(i) * cfg.grid.spacing());
    const double eps = 0.05;
    const std::size_t n_mc = 24;
    const ValueWithError lhs = dchi_inner_product(v, h, 0.5, n_mc, spec, cfg, 19);
    const ValueWithError rhs = chi_diff_quotient(v, h, eps, 0.5, n_mc, spec, cfg, 19);
    // identical streams make the comparison sharp: the gap is O(eps^2) plus
    // the (small) difference of MC fluctuations
    const double tol =
        3.0 * std::sqrt(lhs.stderr_ * lhs.stderr_ + rhs.stderr_ * rhs.stderr_) +
        10.0 * eps * eps * std::max(std::abs(lhs.value), 0.01);
    CHECK(std::abs(lhs.value - rhs.value) < tol);
}

TEST_CASE("sigma2: closed-form case gives one on both routes") {
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    // qv route: Dchi = 0 so g = u and R(g,g) = 1 exactly
    const ValueWithError qv = sigma2_qv_route(kFlat, cfg, 5, 0.5, 4, 0.25, 0.25, 2);
    CHECK(qv.value == Catch::Approx(1.0).margin(1e-10));

    // var route: log Z + t/2 = w_0(t) ~ N(0, t)
    const std::size_t n_rep = 600;
    const double t = 4.0;
    std::vector<double> zt(n_rep);
    const auto n_steps = detail::steps_for(t, cfg.dt, "t");
    for (std::size_t r = 0; r < n_rep; ++r) {
        SheStepper stepper(kFlat, cfg);
        NoisePath path(808, r);
        SheState s = SheState::from(DensityField::uniform(cfg.grid));
        for (std::uint64_t j = 0; j < n_steps; ++j) stepper.step(s, path);
        zt[r] = s.log_mass + 0.5 * t;
    }
    const ValueWithError var = sigma2_var_route(zt, t);
    CHECK(std::abs(var.value - 1.0) < 3.0 * var.stderr_);
}

TEST_CASE("sigma2: default covariance, both routes at or above one") {
    const CovarianceSpec spec = CovarianceSpec::smooth_default();
    const SchemeConfig cfg = smooth_cfg(32, 1e-3);
    const GammaEstimate g = estimate_gamma(spec, cfg, 97, 1.0, 41.0);

    const ValueWithError qv = sigma2_qv_route(spec, cfg, 7, 1.0, 6, 0.25, 0.5, 3);
    CHECK(qv.value >= 1.0 - 3.0 * qv.stderr_);

    const std::size_t n_rep = 300;
    const double t = 6.0;
    std::vector<double> zt(n_rep);
    const auto n_steps = detail::steps_for(t, cfg.dt, "t");
    for (std::size_t r = 0; r < n_rep; ++r) {
        SheStepper stepper(spec, cfg);
        NoisePath path(909, r);
        SheState s = SheState::from(DensityField::uniform(cfg.grid));
        for (std::uint64_t j = 0; j < n_steps; ++j) stepper.step(s, path);
        zt[r] = s.log_mass + g.gamma * t;
    }
    const ValueWithError var = sigma2_var_route(zt, t);
    CHECK(var.value >= 1.0 - 3.0 * var.stderr_);
    // the two routes see the same sigma^2 within their joint error bars
    CHECK(std::abs(var.value - qv.value) <
          3.0 * std::sqrt(var.stderr_ * var.stderr_ + qv.stderr_ * qv.stderr_) + 0.05);
}
