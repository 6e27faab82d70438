#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varspec/closed_form.hpp"
#include "varspec/solver.hpp"
#include "varspec/spectra.hpp"

namespace varspec {

struct CompareThresholds {
    double ks = 0.05;
    double moment = 0.05;  // relative to max(1, |theoretical moment|)
};

struct ComparisonReport {
    double ks = 0.0;
    std::vector<double> moment_gaps;  // l = 1..3
    double mass = 0.0;
    int trimmed = 0;
    std::vector<double> trimmed_values;
    CompareThresholds thresholds;

    bool ks_ok() const { return ks < thresholds.ks; }
};

/// sup |F_emp - F_theory| over eigenvalues (both one-sided limits) and grid
/// points. The theory CDF is 0 left of its grid and 1 right of it. Throws
/// RangeMismatch when the eigenvalues miss the grid widened by its own span
/// on both sides.
double ks_distance(const StepCdf& emp, const CdfTable& theory);

/// Two-sample distance between step CDFs.
double ks_distance(const StepCdf& a, const StepCdf& b);

/// Drops the `count` eigenvalues farthest from the median, one at a time.
EmpiricalSpectrum trim_extremes(const EmpiricalSpectrum& s, int count,
                                std::vector<double>* removed = nullptr);

ComparisonReport compare(const EmpiricalSpectrum& spectrum, const SpectralDensity& density, int trim = 0,
                         const CompareThresholds& thresholds = {});

struct InvariantCheck {
    std::string name;
    cplx z;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
    std::string detail;
};

struct InvariantLedger {
    std::vector<InvariantCheck> checks;

    bool all_passed() const;
    std::vector<InvariantCheck> failures() const;
};

struct InvariantOptions {
    double residual_max = 1e-12;
    double asymptotic_max = 0.01;
    double asymptotic_im = 1e4;
    double warm_cold_max = 1e-10;
    double closed_form_max = 1e-10;
};

/// Per z: domain preservation over all accepted iterates, residual
/// certificate, warm/cold agreement and, when a closed form is supplied, its
/// agreement with the general b-update at the solution. Plus one Stieltjes
/// asymptotics check at z = i * asymptotic_im. Solver failures are recorded,
/// not thrown.
InvariantLedger invariant_suite(const Problem& problem, const std::optional<ClosedFormUpdate>& closed_form,
                                const std::vector<cplx>& z_samples, const SolverConfig& cfg,
                                const InvariantOptions& opts = {});

/// Deterministic spread of spectral parameters over [lo, hi] x Im in [im_lo, im_hi].
std::vector<cplx> sample_z(int count, double lo, double hi, double im_lo = 1e-3, double im_hi = 1.0);

}  // namespace varspec
