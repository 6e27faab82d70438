#include "varspec/spectra.hpp"

#include <algorithm>
#include <cmath>

namespace varspec {

bool SpectralDensity::all_converged() const {
    return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

void SpectralDensity::validate() const {
    require(!grid.empty(), ErrorCode::InvalidArgument, "density grid is empty");
    require(values.size() == grid.size(), ErrorCode::DimensionMismatch,
            "density values and grid differ in length");
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        require(grid[i] > grid[i - 1], ErrorCode::InvalidArgument,
                "density grid must be strictly increasing");
    }
}

double CdfTable::operator()(double x) const {
    if (grid.empty() || x < grid.front()) return 0.0;
    if (x >= grid.back()) return cdf.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - grid.begin());
    const double w = (x - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return cdf[j - 1] + w * (cdf[j] - cdf[j - 1]);
}

double StepCdf::operator()(double x) const {
    const auto it = std::upper_bound(points.begin(), points.end(), x);
    return static_cast<double>(it - points.begin()) / static_cast<double>(points.size());
}

double StepCdf::left_limit(double x) const {
    const auto it = std::lower_bound(points.begin(), points.end(), x);
    return static_cast<double>(it - points.begin()) / static_cast<double>(points.size());
}

CdfTable cdf_from_density(const SpectralDensity& d) {
    d.validate();
    CdfTable t;
    t.grid = d.grid;
    t.cdf.resize(d.size());
    double acc = 0.0;
    t.cdf[0] = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) {
        acc += 0.5 * (d.values[i] + d.values[i - 1]) * (d.grid[i] - d.grid[i - 1]);
        t.cdf[i] = std::clamp(acc, 0.0, 1.0);
    }
    t.total_mass = acc;
    return t;
}

double density_mass(const SpectralDensity& d) { return cdf_from_density(d).total_mass; }

std::vector<double> density_moments(const SpectralDensity& d, int l_max) {
    d.validate();
    require(l_max >= 1, ErrorCode::InvalidArgument, "l_max must be >= 1");
    std::vector<double> m(l_max, 0.0);
    for (std::size_t i = 1; i < d.size(); ++i) {
        const double h = d.grid[i] - d.grid[i - 1];
        double pl = d.grid[i - 1], pr = d.grid[i];
        for (int l = 0; l < l_max; ++l) {
            m[l] += 0.5 * h * (pl * d.values[i - 1] + pr * d.values[i]);
            pl *= d.grid[i - 1];
            pr *= d.grid[i];
        }
    }
    return m;
}

StepCdf empirical_cdf(const EmpiricalSpectrum& s) {
    require(!s.eigenvalues.empty(), ErrorCode::InvalidArgument, "empty spectrum");
    StepCdf c;
    c.points = s.eigenvalues;
    std::sort(c.points.begin(), c.points.end());
    return c;
}

std::vector<double> spectrum_moments(const EmpiricalSpectrum& s, int l_max) {
    require(!s.eigenvalues.empty(), ErrorCode::InvalidArgument, "empty spectrum");
    std::vector<double> m(l_max, 0.0);
    for (double v : s.eigenvalues) {
        double pw = v;
        for (int l = 0; l < l_max; ++l) {
            m[l] += pw;
            pw *= v;
        }
    }
    for (double& x : m) x /= static_cast<double>(s.eigenvalues.size());
    return m;
}

std::pair<double, double> detect_support(const SpectralDensity& d, double rel_threshold,
                                         double pad_fraction) {
    d.validate();
    const double fmax = *std::max_element(d.values.begin(), d.values.end());
    require(fmax > 0.0, ErrorCode::MassDeficit, "density vanishes on the whole grid");
    const double thr = rel_threshold * fmax;
    std::size_t first = d.size(), last = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.values[i] > thr) {
            first = std::min(first, i);
            last = i;
        }
    }
    double lo = d.grid[first], hi = d.grid[last];
    // one grid cell of slack so a bump between samples is not cut
    if (first > 0) lo = d.grid[first - 1];
    if (last + 1 < d.size()) hi = d.grid[last + 1];
    const double pad = pad_fraction * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace varspec
