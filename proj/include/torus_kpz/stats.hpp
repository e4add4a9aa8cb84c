#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "torus_kpz/errors.hpp"

namespace torus_kpz {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

inline Moments compute_moments(const std::vector<double>& xs) {
    Moments m;
    m.count = xs.size();
    if (xs.empty()) return m;
    double s = 0.0;
    for (double x : xs) s += x;
    m.mean = s / static_cast<double>(xs.size());
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(xs.size());
    if (xs.size() > 1) m.variance = m2 / (n - 1.0);
    if (m2 > 0.0) {
        const double sd = std::sqrt(m2 / n);
        m.skewness = (m3 / n) / (sd * sd * sd);
        m.excess_kurtosis = (m4 / n) / ((m2 / n) * (m2 / n)) - 3.0;
    }
    return m;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation refined by one Halley step; good to ~1e-15.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p in (0,1) required");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// Survival function of the Kolmogorov distribution, Q(x) = 2 sum (-1)^{j-1} e^{-2 j^2 x^2}.
inline double kolmogorov_q(double x) {
    if (x <= 0.0) return 1.0;
    double s = 0.0;
    for (int j = 1; j <= 200; ++j) {
        const double term = std::exp(-2.0 * static_cast<double>(j) * j * x * x);
        if (term < 1e-17) break;
        s += (j & 1) ? term : -term;
    }
    return std::min(1.0, std::max(0.0, 2.0 * s));
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS test against N(mu, sigma2) with fixed (plug-in) parameters.
// p-value via the Stephens small-sample adjustment of the Kolmogorov law.
inline KsResult ks_test_normal(std::vector<double> xs, double mu, double sigma2) {
    if (xs.size() < 2) throw TooFewSamples("ks_test_normal: need >= 2 samples");
    if (!(sigma2 > 0.0)) throw ConfigError("ks_test_normal: sigma2 must be > 0");
    std::sort(xs.begin(), xs.end());
    const double sd = std::sqrt(sigma2);
    const double n = static_cast<double>(xs.size());
    double D = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double F = normal_cdf((xs[i] - mu) / sd);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        D = std::max(D, std::max(F - lo, hi - F));
    }
    KsResult r;
    r.statistic = D;
    const double sq = std::sqrt(n);
    r.p_value = kolmogorov_q((sq + 0.12 + 0.11 / sq) * D);
    return r;
}

// Anderson-Darling statistic against N(mu, sigma2), fixed parameters.
inline double anderson_darling_normal(std::vector<double> xs, double mu, double sigma2) {
    if (xs.size() < 2) throw TooFewSamples("anderson_darling_normal: need >= 2 samples");
    std::sort(xs.begin(), xs.end());
    const double sd = std::sqrt(sigma2);
    const double n = static_cast<double>(xs.size());
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double F = normal_cdf((xs[i] - mu) / sd);
        F = std::min(1.0 - 1e-15, std::max(1e-15, F));
        const double Fr = normal_cdf((xs[xs.size() - 1 - i] - mu) / sd);
        const double Frc = std::min(1.0 - 1e-15, std::max(1e-15, 1.0 - Fr));
        s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(F) + std::log(Frc));
    }
    return -n - s / n;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("linear_fit: need matching vectors, length >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    if (sxx == 0.0) throw ConfigError("linear_fit: degenerate abscissa");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

// Standard error of the mean of a correlated series via batch means.
inline double batch_means_stderr(const std::vector<double>& series, std::size_t n_batches = 20) {
    if (series.size() < 2 * n_batches)
        throw InsufficientSamples("batch_means_stderr: series too short");
    const std::size_t len = series.size() / n_batches;
    std::vector<double> means;
    means.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += series[i];
        means.push_back(s / static_cast<double>(len));
    }
    const Moments m = compute_moments(means);
    return std::sqrt(m.variance / static_cast<double>(n_batches));
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) throw ConfigError("median_of: empty");
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace torus_kpz
