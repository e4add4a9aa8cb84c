#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"

namespace torus_kpz {

// Uniform periodic grid on [0,1)^d with n cells per dimension, n a power of
// two. Cell i (row-major multi-index) sits at x = i*h, h = 1/n.
struct TorusGrid {
    int dim = 1;
    int points_per_dim = 64;

    TorusGrid() = default;
    TorusGrid(int d, int n) : dim(d), points_per_dim(n) {
        if (d < 1) throw ConfigError("TorusGrid: dim must be >= 1");
        if (n < 4 || (n & (n - 1)) != 0)
            throw ConfigError("TorusGrid: points_per_dim must be a power of two >= 4");
    }

    double spacing() const { return 1.0 / points_per_dim; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(points_per_dim);
        return s;
    }

    // h^d, the cell volume used by every quadrature in the library.
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing();
        return v;
    }

    bool operator==(const TorusGrid& o) const {
        return dim == o.dim && points_per_dim == o.points_per_dim;
    }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

// Real-valued samples on a TorusGrid, row-major.
struct Field {
    TorusGrid grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const TorusGrid& g, double fill = 0.0)
        : grid(g), values(g.size(), fill) {}

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Complex Fourier coefficients c_k in standard DFT index order per axis:
// index j maps to integer frequency j for j <= n/2, j-n otherwise.
struct Spectrum {
    TorusGrid grid;
    std::vector<std::complex<double>> coeffs;

    Spectrum() = default;
    explicit Spectrum(const TorusGrid& g) : grid(g), coeffs(g.size()) {}

    // Signed frequency of axis index j.
    int frequency(int j) const {
        const int n = grid.points_per_dim;
        return j <= n / 2 ? j : j - n;
    }
};

namespace detail {

// In-place iterative radix-2 complex FFT; sign=-1 forward, +1 inverse
// (unnormalized).
inline void fft_pow2(std::complex<double>* data, std::size_t n, std::size_t stride,
                     int sign) {
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double>& a = data[(i + k) * stride];
                std::complex<double>& b = data[(i + k + len / 2) * stride];
                const std::complex<double> t = b * w;
                b = a - t;
                a += t;
                w *= wlen;
            }
        }
    }
}

// d-dimensional FFT over a row-major cube of side n.
inline void fft_nd(std::complex<double>* data, int dim, int n, int sign) {
    const std::size_t nn = static_cast<std::size_t>(n);
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= nn;
    // Axis a has stride n^(dim-1-a) in row-major layout.
    for (int a = 0; a < dim; ++a) {
        std::size_t stride = 1;
        for (int b = a + 1; b < dim; ++b) stride *= nn;
        const std::size_t block = stride * nn;  // elements spanned by one transform set
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                fft_pow2(data + base + off, nn, stride, sign);
            }
        }
    }
}

}  // namespace detail

// Discrete integral h^d * sum_i f_i.
inline double integrate(const Field& f) {
    double s = std::accumulate(f.values.begin(), f.values.end(), 0.0);
    return s * f.grid.cell_volume();
}

// c_k = h^d sum_i f_i exp(-i 2 pi k.x_i), the trapezoidal approximation of
// the continuum Fourier coefficient. c_0 equals integrate(f).
inline Spectrum to_spectrum(const Field& f) {
    Spectrum s(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) s.coeffs[i] = f.values[i];
    detail::fft_nd(s.coeffs.data(), f.grid.dim, f.grid.points_per_dim, -1);
    const double hd = f.grid.cell_volume();
    for (auto& c : s.coeffs) c *= hd;
    return s;
}

// f_i = sum_k c_k exp(+i 2 pi k.x_i); inverse of to_spectrum.
inline Field from_spectrum(const Spectrum& s) {
    std::vector<std::complex<double>> work = s.coeffs;
    detail::fft_nd(work.data(), s.grid.dim, s.grid.points_per_dim, +1);
    Field f(s.grid);
    const double scale = 1.0 / s.grid.cell_volume() / static_cast<double>(s.grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = work[i].real() * scale;
    return f;
}

// A Field certified to be a probability density: values >= 0 and
// h^d sum = 1 to 1e-12.
struct DensityField {
    Field field;

    DensityField() = default;

    const TorusGrid& grid() const { return field.grid; }
    const std::vector<double>& values() const { return field.values; }
    std::size_t size() const { return field.size(); }

    static DensityField certify(Field f) {
        for (double v : f.values) {
            if (!std::isfinite(v)) throw NumericError("DensityField: non-finite value");
            if (v < 0.0) throw NegativeValue("DensityField: negative value");
        }
        const double mass = integrate(f);
        if (std::abs(mass - 1.0) > 1e-12)
            throw NonpositiveMass("DensityField: mass differs from 1 by " +
                                  std::to_string(mass - 1.0));
        DensityField d;
        d.field = std::move(f);
        return d;
    }

    // Uniform density (constant 1).
    static DensityField uniform(const TorusGrid& g) {
        DensityField d;
        d.field = Field(g, 1.0);
        return d;
    }

    // Dirac measure at the cell nearest to x: mass 1 concentrated as value
    // 1/h^d in one cell.
    static DensityField dirac(const TorusGrid& g, const std::vector<double>& x) {
        if (static_cast<int>(x.size()) != g.dim)
            throw ConfigError("dirac: point dimension mismatch");
        std::size_t idx = 0;
        for (int a = 0; a < g.dim; ++a) {
            double xa = x[a] - std::floor(x[a]);
            long cell = std::lround(xa * g.points_per_dim) % g.points_per_dim;
            idx = idx * g.points_per_dim + static_cast<std::size_t>(cell);
        }
        DensityField d;
        d.field = Field(g, 0.0);
        d.field.values[idx] = 1.0 / g.cell_volume();
        return d;
    }
};

struct NormalizeResult {
    DensityField density;
    double log_mass = 0.0;
    std::size_t clamped_cells = 0;  // values in (-1e-14, 0) snapped to 0
};

// Normalizes a nonnegative field to a probability density and returns
// log of the removed mass. FP-noise negatives within -1e-14 are clamped and
// counted; anything more negative is a genuine scheme failure.
inline NormalizeResult normalize_to_density(const Field& f) {
    NormalizeResult out;
    Field g = f;
    for (double& v : g.values) {
        if (!std::isfinite(v)) throw NumericError("normalize_to_density: non-finite value");
        if (v < 0.0) {
            if (v < -1e-14)
                throw NegativeValue("normalize_to_density: value " + std::to_string(v));
            v = 0.0;
            ++out.clamped_cells;
        }
    }
    const double mass = integrate(g);
    if (!(mass > 0.0)) throw NonpositiveMass("normalize_to_density: mass <= 0");
    const double inv = 1.0 / mass;
    for (double& v : g.values) v *= inv;
    out.density.field = std::move(g);
    out.log_mass = std::log(mass);
    return out;
}

// --- serialization -------------------------------------------------------

// One CSV row: the flattened x coordinates (row-major, d per cell), then the
// values, 17 significant digits.
inline void write_field_csv(std::ostream& os, const Field& f) {
    os << std::setprecision(17);
    const std::size_t n = static_cast<std::size_t>(f.grid.points_per_dim);
    const double h = f.grid.spacing();
    bool first = true;
    const std::size_t total = f.size();
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rem = i;
        std::size_t div = total / n;  // n^(d-1)
        for (int a = 0; a < f.grid.dim; ++a) {
            const std::size_t ia = rem / div;
            rem %= div;
            div = div >= n ? div / n : 1;
            if (!first) os << ',';
            first = false;
            os << static_cast<double>(ia) * h;
        }
    }
    for (std::size_t i = 0; i < total; ++i) os << ',' << f.values[i];
    os << '\n';
}

// Raw little-endian block: 8-byte header (uint32 d, uint32 n), then n^d
// float64 values.
inline void write_field_binary(std::ostream& os, const Field& f) {
    const std::uint32_t d = static_cast<std::uint32_t>(f.grid.dim);
    const std::uint32_t n = static_cast<std::uint32_t>(f.grid.points_per_dim);
    os.write(reinterpret_cast<const char*>(&d), 4);
    os.write(reinterpret_cast<const char*>(&n), 4);
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

inline Field read_field_binary(std::istream& is) {
    std::uint32_t d = 0, n = 0;
    is.read(reinterpret_cast<char*>(&d), 4);
    is.read(reinterpret_cast<char*>(&n), 4);
    if (!is) throw ConfigError("read_field_binary: truncated header");
    Field f(TorusGrid(static_cast<int>(d), static_cast<int>(n)));
    is.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!is) throw ConfigError("read_field_binary: truncated payload");
    return f;
}

// --- small field helpers used across modules -----------------------------

inline double sup_norm(const Field& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

inline double l1_norm(const Field& f) {
    double s = 0.0;
    for (double v : f.values) s += std::abs(v);
    return s * f.grid.cell_volume();
}

inline double l2_norm_sq(const Field& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return s * f.grid.cell_volume();
}

inline double min_value(const Field& f) {
    return *std::min_element(f.values.begin(), f.values.end());
}

inline double max_value(const Field& f) {
    return *std::max_element(f.values.begin(), f.values.end());
}

}  // namespace torus_kpz
