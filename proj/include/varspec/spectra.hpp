#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "varspec/common.hpp"

namespace varspec {

// pi^{-1} Im m0(x + i eps) sampled on a grid.
struct SpectralDensity {
    std::vector<double> grid;
    std::vector<double> values;
    double epsilon = 1e-4;
    std::vector<bool> converged;
    std::vector<int> iterations;

    std::size_t size() const { return grid.size(); }
    bool all_converged() const;
    void validate() const;
};

struct EmpiricalSpectrum {
    std::vector<double> eigenvalues;  // ascending
    int p = 0;
    std::string design;
    std::uint64_t seed = 0;
    int replicate = 0;
};

// Trapezoidal cumulative integral of a SpectralDensity.
struct CdfTable {
    std::vector<double> grid;
    std::vector<double> cdf;  // clipped to [0, 1]
    double total_mass = 0.0;  // before clipping

    bool mass_deficit() const { return total_mass < 0.95; }
    /// Linear interpolation; 0 left of the grid and cdf.back() right of it.
    double operator()(double x) const;
};

// Right-continuous step function with jumps 1/p at the eigenvalues.
struct StepCdf {
    std::vector<double> points;  // ascending

    double operator()(double x) const;      // F(x)
    double left_limit(double x) const;      // F(x-)
    std::size_t size() const { return points.size(); }
};

CdfTable cdf_from_density(const SpectralDensity& d);

/// int x^l f(x) dx for l = 1..l_max by the trapezoid rule.
std::vector<double> density_moments(const SpectralDensity& d, int l_max);

/// Total trapezoidal mass of the density.
double density_mass(const SpectralDensity& d);

StepCdf empirical_cdf(const EmpiricalSpectrum& s);

/// p^{-1} sum lambda_i^l for l = 1..l_max.
std::vector<double> spectrum_moments(const EmpiricalSpectrum& s, int l_max);

/// Interval where f exceeds rel_threshold * max f, widened by pad_fraction
/// of its length on both sides.
std::pair<double, double> detect_support(const SpectralDensity& d, double rel_threshold = 1e-6,
                                         double pad_fraction = 0.05);

}  // namespace varspec
