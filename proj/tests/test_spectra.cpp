#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "varspec/solver.hpp"
#include "varspec/spectra.hpp"

using namespace varspec;

namespace {

SpectralDensity tabulate(const std::vector<double>& x, double eps, double (*f)(double, double), double arg) {
    SpectralDensity d;
    d.grid = x;
    d.epsilon = eps;
    for (double v : x) {
        d.values.push_back(f(v, arg));
        d.converged.push_back(true);
        d.iterations.push_back(0);
    }
    return d;
}

double cauchy(double x, double eps) { return eps / (std::numbers::pi * (x * x + eps * eps)); }

}  // namespace

TEST(CdfFromDensity, SmoothedDeltaMass) {
    const double eps = 1e-4;
    const auto d = tabulate(linspace(-100 * eps, 100 * eps, 4001), eps, cauchy, eps);
    const CdfTable c = cdf_from_density(d);
    // exact mass on [-100 eps, 100 eps] is (2/pi) atan(100)
    EXPECT_NEAR(c.total_mass, 2.0 / std::numbers::pi * std::atan(100.0), 1e-4);
    EXPECT_GE(c.total_mass, 0.95);
    EXPECT_LE(c.total_mass, 1.02);
    EXPECT_FALSE(c.mass_deficit());
    EXPECT_NEAR(c(0.0), 0.5 * c.total_mass, 1e-9);
    for (std::size_t i = 1; i < c.cdf.size(); ++i) EXPECT_GE(c.cdf[i], c.cdf[i - 1]);
}

TEST(CdfFromDensity, MarcenkoPasturMass) {
    const double lo = std::pow(1 - std::sqrt(0.5), 2), hi = std::pow(1 + std::sqrt(0.5), 2);
    std::vector<double> x;
    for (double v = lo - 0.1; v <= hi + 0.1; v += 1e-3) x.push_back(v);
    const auto d = tabulate(x, 1e-4, oracle::mp_density, 0.5);
    const double m = cdf_from_density(d).total_mass;
    EXPECT_GE(m, 0.98);
    EXPECT_LE(m, 1.02);
}

TEST(CdfFromDensity, NarrowGridReportsDeficit) {
    const double eps = 1e-2;
    const auto d = tabulate(linspace(-eps, eps, 101), eps, cauchy, eps);
    EXPECT_TRUE(cdf_from_density(d).mass_deficit());
}

TEST(DensityMoments, MarcenkoPastur) {
    for (double gamma : {0.25, 0.5}) {
        const double lo = std::pow(1 - std::sqrt(gamma), 2), hi = std::pow(1 + std::sqrt(gamma), 2);
        const auto d = tabulate(linspace(lo, hi, 200001), 1e-4, oracle::mp_density, gamma);
        const auto m = density_moments(d, 3);
        EXPECT_NEAR(m[0], 1.0, 1e-4);
        EXPECT_NEAR(m[1], 1.0 + gamma, 1e-4);
        EXPECT_NEAR(m[2], 1.0 + 3.0 * gamma + gamma * gamma, 1e-4);
    }
}

TEST(DensityMoments, DeltaZero) {
    const double eps = 1e-4;
    const auto d = tabulate(linspace(-100 * eps, 100 * eps, 2001), eps, cauchy, eps);
    const auto m = density_moments(d, 3);
    EXPECT_NEAR(m[0], 0.0, 1e-12);
    EXPECT_LT(std::abs(m[1]), 100 * eps * 100 * eps);
    EXPECT_NEAR(m[2], 0.0, 1e-12);
    EXPECT_THROW(density_moments(d, 0), Error);
}

TEST(EmpiricalCdf, Steps) {
    EmpiricalSpectrum s;
    s.eigenvalues = {0.0};
    StepCdf c = empirical_cdf(s);
    EXPECT_EQ(c(-1e-300), 0.0);
    EXPECT_EQ(c(0.0), 1.0);
    EXPECT_EQ(c.left_limit(0.0), 0.0);

    s.eigenvalues = std::vector<double>(5, 2.0);
    c = empirical_cdf(s);
    EXPECT_EQ(c(1.999), 0.0);
    EXPECT_EQ(c(2.0), 1.0);

    const int p = 8;
    s.eigenvalues.clear();
    for (int i = 1; i <= p; ++i) s.eigenvalues.push_back(static_cast<double>(i) / p);
    c = empirical_cdf(s);
    for (double x : {0.05, 0.3, 0.5, 0.77, 0.99, 1.0}) EXPECT_DOUBLE_EQ(c(x), std::floor(p * x) / p) << x;
    s.eigenvalues.clear();
    EXPECT_THROW(empirical_cdf(s), Error);
}

TEST(DetectSupport, MarcenkoPastur) {
    const auto d = tabulate(linspace(-1.0, 4.0, 5001), 1e-4, oracle::mp_density, 0.5);
    const auto [lo, hi] = detect_support(d);
    const double a = std::pow(1 - std::sqrt(0.5), 2), b = std::pow(1 + std::sqrt(0.5), 2);
    EXPECT_LT(lo, a);
    EXPECT_GT(hi, b);
    EXPECT_LT(hi - lo, 1.2 * (b - a));
}

TEST(SpectralDensity, Validation) {
    SpectralDensity d;
    EXPECT_THROW(d.validate(), Error);
    d.grid = {0.0, 0.0};
    d.values = {1.0, 1.0};
    EXPECT_THROW(d.validate(), Error);
}
