#include <catch_amalgamated.hpp>

#include <cmath>

#include "torus_kpz/grid.hpp"
#include "torus_kpz/heat_kernel.hpp"
#include "torus_kpz/rng.hpp"

using namespace torus_kpz;

TEST_CASE("eval_p: probability kernel, long-time limit, positivity") {
    const TorusGrid g(1, 256);
    for (double t : {0.01, 0.1, 1.0, 10.0}) {
        Field f(g);
        for (std::size_t i = 0; i < g.size(); ++i)
            f.values[i] = eval_p(t, static_cast<double>(i) * g.spacing());
        CHECK(integrate(f) == Catch::Approx(1.0).margin(1e-10));
        CHECK(min_value(f) > 0.0);
    }
    double dev = 0.0;
    for (int i = 0; i < 100; ++i)
        dev = std::max(dev, std::abs(eval_p(10.0, i / 100.0) - 1.0));
    CHECK(dev < 1e-8);
    CHECK_THROWS_AS(eval_p(0.0, 0.5), NonpositiveTime);
    CHECK_THROWS_AS(eval_p(-1.0, 0.5), NonpositiveTime);
}

TEST_CASE("eval_p: image sum and Fourier sum agree at the crossover") {
    KernelConfig image_side;           // t_star = 0.15: t <= t_star uses images
    KernelConfig fourier_side;
    fourier_side.t_star = 0.1499;      // forces the Fourier branch at t = 0.15
    CounterRng rng(99, 0);
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform(0, static_cast<std::uint64_t>(i));
        const double a = eval_p(0.15, x, image_side);
        const double b = eval_p(0.15, x, fourier_side);
        CHECK(a == Catch::Approx(b).margin(1e-12));
    }
}

TEST_CASE("eval_p in d=2 factorizes") {
    const double t = 0.3;
    const double v = eval_p(t, {0.2, 0.7});
    CHECK(v == Catch::Approx(eval_p(t, 0.2) * eval_p(t, 0.7)).margin(1e-13));
    // mass one on a d=2 grid
    const TorusGrid g(2, 32);
    Field f(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = static_cast<double>(i / 32) * g.spacing();
        const double y = static_cast<double>(i % 32) * g.spacing();
        f.values[i] = eval_p(0.05, {x, y});
    }
    CHECK(integrate(f) == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("apply_semigroup: identity, eigenvalue decay, mass conservation") {
    const TorusGrid g(1, 64);
    CounterRng rng(7, 0);
    Field f(g);
    for (std::size_t i = 0; i < 64; ++i) f.values[i] = rng.normal(0, i);

    const Field id = apply_semigroup(f, 0.0);
    for (std::size_t i = 0; i < 64; ++i) CHECK(id.values[i] == f.values[i]);

    Field cosf(g);
    for (std::size_t i = 0; i < 64; ++i)
        cosf.values[i] = std::cos(2.0 * M_PI * static_cast<double>(i) / 64.0);
    const Field decayed = apply_semigroup(cosf, 0.1);
    const double lam = std::exp(-2.0 * M_PI * M_PI * 0.1);
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(decayed.values[i] == Catch::Approx(lam * cosf.values[i]).margin(1e-13));

    CHECK(integrate(apply_semigroup(f, 0.37)) ==
          Catch::Approx(integrate(f)).margin(1e-14));
    CHECK_THROWS_AS(apply_semigroup(f, -0.1), NegativeTime);
}

TEST_CASE("apply_semigroup: semigroup property and maximum principle") {
    const TorusGrid g(1, 64);
    CounterRng rng(13, 0);
    Field f(g);
    for (std::size_t i = 0; i < 64; ++i) f.values[i] = 1.0 + rng.uniform(0, i);

    const Field ab = apply_semigroup(apply_semigroup(f, 0.07), 0.05);
    const Field once = apply_semigroup(f, 0.12);
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(ab.values[i] == Catch::Approx(once.values[i]).margin(1e-11));

    CHECK(max_value(once) <= max_value(f) + 1e-12);
    CHECK(min_value(once) >= min_value(f) - 1e-12);

    // density inputs stay densities (up to tiny clamped ringing)
    const NormalizeResult nr = normalize_to_density(f);
    const Field evolved = apply_semigroup(nr.density.field, 0.05);
    CHECK(min_value(evolved) > -1e-13);
    CHECK(integrate(evolved) == Catch::Approx(1.0).margin(1e-13));
}

TEST_CASE("semigroup from a grid Dirac approximates the kernel") {
    const TorusGrid g(1, 128);
    const DensityField delta = DensityField::dirac(g, {0.5});
    const double t = 0.1;
    const Field evolved = apply_semigroup(delta.field, t);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = static_cast<double>(i) * g.spacing();
        dev = std::max(dev, std::abs(evolved.values[i] - eval_p(t, x - 0.5)));
    }
    CHECK(dev < 1e-3);
}
