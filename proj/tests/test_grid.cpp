#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "torus_kpz/grid.hpp"
#include "torus_kpz/rng.hpp"

using namespace torus_kpz;

namespace {

Field random_field(const TorusGrid& g, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
    CounterRng rng(seed, 7);
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i)
        f.values[i] = lo + (hi - lo) * rng.uniform(0, i);
    return f;
}

// independent quadrature oracle: Kahan-compensated summation
double kahan_integral(const Field& f) {
    double s = 0.0, c = 0.0;
    for (double v : f.values) {
        const double y = v - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s * f.grid.cell_volume();
}

}  // namespace

TEST_CASE("grid invariants") {
    TorusGrid g(1, 64);
    CHECK(g.spacing() == 1.0 / 64.0);
    CHECK(g.size() == 64);
    CHECK(g.cell_volume() == g.spacing());
    CHECK_THROWS_AS(TorusGrid(1, 3), ConfigError);
    CHECK_THROWS_AS(TorusGrid(1, 48), ConfigError);  // not a power of two
    CHECK_THROWS_AS(TorusGrid(0, 64), ConfigError);
    TorusGrid g2(2, 16);
    CHECK(g2.size() == 256);
    CHECK(g2.cell_volume() == Catch::Approx(1.0 / 256.0));
}

TEST_CASE("integrate: constants, orthogonality, oracle") {
    TorusGrid g(1, 64);
    Field one(g, 1.0);
    CHECK(integrate(one) == Catch::Approx(1.0).margin(1e-15));

    Field cosf(g);
    for (std::size_t i = 0; i < 64; ++i)
        cosf.values[i] = std::cos(2.0 * M_PI * static_cast<double>(i) / 64.0);
    CHECK(std::abs(integrate(cosf)) < 1e-14);

    const Field f = random_field(g, 11);
    CHECK(integrate(f) == Catch::Approx(kahan_integral(f)).margin(1e-12));

    // linearity
    const Field h = random_field(g, 12);
    Field lin(g);
    for (std::size_t i = 0; i < 64; ++i)
        lin.values[i] = 2.5 * f.values[i] - 0.75 * h.values[i];
    CHECK(integrate(lin) ==
          Catch::Approx(2.5 * integrate(f) - 0.75 * integrate(h)).margin(1e-12));
}

TEST_CASE("spectrum: delta, constant, round trip, Parseval") {
    TorusGrid g(1, 64);

    Field delta(g, 0.0);
    delta.values[0] = 1.0;
    const Spectrum sd = to_spectrum(delta);
    for (const auto& c : sd.coeffs) {
        CHECK(c.real() == Catch::Approx(1.0 / 64.0).margin(1e-15));
        CHECK(std::abs(c.imag()) < 1e-15);
    }

    Field one(g, 1.0);
    const Spectrum so = to_spectrum(one);
    CHECK(so.coeffs[0].real() == Catch::Approx(1.0).margin(1e-14));
    for (std::size_t k = 1; k < so.coeffs.size(); ++k)
        CHECK(std::abs(so.coeffs[k]) < 1e-14);

    const Field f = random_field(g, 21);
    const Spectrum s = to_spectrum(f);
    const Field back = from_spectrum(s);
    double scale = sup_norm(f);
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(back.values[i] - f.values[i]) < 1e-12 * scale);

    double lhs = l2_norm_sq(f);
    double rhs = 0.0;
    for (const auto& c : s.coeffs) rhs += std::norm(c);
    CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("spectrum in d=2") {
    TorusGrid g(2, 16);
    Field f(g);
    CounterRng rng(5, 5);
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = rng.normal(0, i);
    const Field back = from_spectrum(to_spectrum(f));
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(back.values[i] - f.values[i]) < 1e-12 * (1.0 + sup_norm(f)));

    // cos(2 pi x) has a pure (1,0) line; integral vanishes on the exact grid
    Field cosf(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const std::size_t ix = i / 16;
        cosf.values[i] = std::cos(2.0 * M_PI * static_cast<double>(ix) / 16.0);
    }
    CHECK(std::abs(integrate(cosf)) < 1e-13);
}

TEST_CASE("normalize_to_density") {
    TorusGrid g(1, 64);

    Field three(g, 3.0);
    const NormalizeResult r1 = normalize_to_density(three);
    CHECK(r1.log_mass == Catch::Approx(std::log(3.0)).margin(1e-14));
    for (double v : r1.density.values()) CHECK(v == Catch::Approx(1.0).margin(1e-14));

    const DensityField d = DensityField::dirac(g, {0.25});
    const NormalizeResult r2 = normalize_to_density(d.field);
    CHECK(r2.log_mass == Catch::Approx(0.0).margin(1e-13));
    CHECK(r2.density.values()[16] == Catch::Approx(64.0));

    Field mix(g);
    for (std::size_t i = 0; i < 64; ++i)
        mix.values[i] = 1.0 + 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / 64.0);
    const NormalizeResult r3 = normalize_to_density(mix);
    CHECK(r3.log_mass == Catch::Approx(0.0).margin(1e-14));  // int cos = 0 on the grid
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(r3.density.values()[i] == Catch::Approx(mix.values[i]).margin(1e-13));

    // idempotence on own output
    const NormalizeResult r4 = normalize_to_density(r3.density.field);
    CHECK(r4.log_mass == Catch::Approx(0.0).margin(1e-14));

    // error paths
    Field zero(g, 0.0);
    CHECK_THROWS_AS(normalize_to_density(zero), NonpositiveMass);
    Field neg(g, 1.0);
    neg.values[3] = -1e-10;
    CHECK_THROWS_AS(normalize_to_density(neg), NegativeValue);
    Field tiny_neg(g, 1.0);
    tiny_neg.values[3] = -5e-15;  // FP noise, clamped and counted
    const NormalizeResult r5 = normalize_to_density(tiny_neg);
    CHECK(r5.clamped_cells == 1);
}

TEST_CASE("field serialization round trip") {
    TorusGrid g(1, 8);
    const Field f = random_field(g, 33);

    std::ostringstream csv;
    write_field_csv(csv, f);
    const std::string line = csv.str();
    // 8 coordinates + 8 values
    CHECK(std::count(line.begin(), line.end(), ',') == 15);
    CHECK(line.substr(0, 2) == "0,");

    std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
    write_field_binary(bin, f);
    const Field back = read_field_binary(bin);
    CHECK(back.grid == f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(back.values[i] == f.values[i]);
}
