#include "varspec/validate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace varspec {

namespace {

double theory_at(const CdfTable& t, double x) {
    if (x < t.grid.front()) return 0.0;
    if (x > t.grid.back()) return 1.0;
    return t(x);
}

double inf_norm(const CVec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::string z_text(cplx z) {
    std::ostringstream os;
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

}  // namespace

double ks_distance(const StepCdf& emp, const CdfTable& theory) {
    require(!emp.points.empty(), ErrorCode::InvalidArgument, "empty empirical CDF");
    require(!theory.grid.empty() && theory.grid.size() == theory.cdf.size(), ErrorCode::InvalidArgument,
            "malformed CDF table");
    const double g0 = theory.grid.front(), g1 = theory.grid.back();
    const double span = std::max(g1 - g0, 0.0);
    const double lo = emp.points.front(), hi = emp.points.back();
    if (hi < g0 - span || lo > g1 + span) {
        std::ostringstream os;
        os << "eigenvalues in [" << lo << ", " << hi << "] do not overlap the density grid [" << g0
           << ", " << g1 << "]";
        throw Error(ErrorCode::RangeMismatch, os.str());
    }

    // Between consecutive breakpoints the difference is monotone, so the sup
    // is reached at an eigenvalue or a grid point.
    double ks = 0.0;
    for (double x : emp.points) {
        const double ft = theory_at(theory, x);
        ks = std::max({ks, std::abs(emp(x) - ft), std::abs(emp.left_limit(x) - ft)});
    }
    for (std::size_t i = 0; i < theory.grid.size(); ++i) {
        const double x = theory.grid[i];
        const double ft = theory.cdf[i];
        ks = std::max({ks, std::abs(emp(x) - ft), std::abs(emp.left_limit(x) - ft)});
    }
    // the theory CDF jumps to 1 just right of the grid
    ks = std::max(ks, std::abs(emp(g1) - 1.0));
    return std::min(ks, 1.0);
}

double ks_distance(const StepCdf& a, const StepCdf& b) {
    require(!a.points.empty() && !b.points.empty(), ErrorCode::InvalidArgument, "empty empirical CDF");
    double ks = 0.0;
    for (const StepCdf* c : {&a, &b})
        for (double x : c->points) ks = std::max(ks, std::abs(a(x) - b(x)));
    return ks;
}

EmpiricalSpectrum trim_extremes(const EmpiricalSpectrum& s, int count, std::vector<double>* removed) {
    require(count >= 0, ErrorCode::InvalidArgument, "trim must be >= 0");
    require(count < static_cast<int>(s.eigenvalues.size()), ErrorCode::InvalidArgument,
            "cannot trim every eigenvalue");
    std::vector<double> v = s.eigenvalues;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    const double median = (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    std::size_t a = 0, b = m;  // remaining range [a, b)
    for (int i = 0; i < count; ++i) {
        if (median - v[a] >= v[b - 1] - median) {
            if (removed) removed->push_back(v[a]);
            ++a;
        } else {
            if (removed) removed->push_back(v[b - 1]);
            --b;
        }
    }
    EmpiricalSpectrum out = s;
    out.eigenvalues.assign(v.begin() + static_cast<std::ptrdiff_t>(a), v.begin() + static_cast<std::ptrdiff_t>(b));
    return out;
}

ComparisonReport compare(const EmpiricalSpectrum& spectrum, const SpectralDensity& density, int trim,
                         const CompareThresholds& thresholds) {
    ComparisonReport rep;
    rep.thresholds = thresholds;
    rep.trimmed = trim;
    const EmpiricalSpectrum kept = trim_extremes(spectrum, trim, &rep.trimmed_values);

    const CdfTable cdf = cdf_from_density(density);
    rep.mass = cdf.total_mass;
    rep.ks = ks_distance(empirical_cdf(kept), cdf);

    const auto th = density_moments(density, 3);
    const auto em = spectrum_moments(kept, 3);
    for (int l = 0; l < 3; ++l) rep.moment_gaps.push_back(std::abs(em[l] - th[l]));
    return rep;
}

bool InvariantLedger::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
}

std::vector<InvariantCheck> InvariantLedger::failures() const {
    std::vector<InvariantCheck> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c);
    return out;
}

std::vector<cplx> sample_z(int count, double lo, double hi, double im_lo, double im_hi) {
    require(count >= 1 && hi >= lo && im_lo > 0.0 && im_hi >= im_lo, ErrorCode::InvalidArgument,
            "bad z-sample range");
    constexpr double golden = 0.6180339887498949;
    std::vector<cplx> z;
    for (int i = 0; i < count; ++i) {
        const double re = lo + (hi - lo) * (i + 0.5) / count;
        const double frac = std::fmod((i + 1) * golden, 1.0);
        z.emplace_back(re, im_lo * std::pow(im_hi / im_lo, frac));
    }
    return z;
}

InvariantLedger invariant_suite(const Problem& pr, const std::optional<ClosedFormUpdate>& cf,
                                const std::vector<cplx>& zs, const SolverConfig& cfg,
                                const InvariantOptions& opts) {
    InvariantLedger led;
    auto record = [&](std::string name, cplx z, double value, double thr, bool ok, std::string detail = {}) {
        led.checks.push_back({std::move(name), z, value, thr, ok, std::move(detail)});
    };

    for (cplx z : zs) {
        require(z.imag() > 0.0, ErrorCode::InvalidArgument, "z-samples need Im z > 0");
        FixedPoint cold;
        try {
            cold = solve_at_z(z, pr, cfg);
        } catch (const Error& e) {
            record("solve", z, 0.0, 0.0, false, e.what());
            continue;
        }

        const double slack = 1e-10 * std::max({1.0, inf_norm(cold.a), inf_norm(cold.b)});
        const double worst = std::min(cold.min_im_a, cold.min_im_b);
        record("domain", z, std::min(worst, cold.min_im_m0), 0.0,
               worst >= -slack && cold.min_im_m0 > 0.0,
               "min Im a, Im b over iterates; Im m0 must stay positive");

        double res = 0.0;
        CVec a_check;
        try {
            a_check = pr.resolvent->a_update(z, cold.b);
            res = inf_norm(pr.b_update(a_check) - cold.b);
        } catch (const Error& e) {
            record("residual", z, 0.0, opts.residual_max, false, e.what());
            continue;
        }
        record("residual", z, res, opts.residual_max, res <= opts.residual_max);

        // warm start from the solution at a nearby point
        try {
            const cplx z_near(z.real() + 0.05 * std::max(1.0, std::abs(z.real())), z.imag() * 1.5);
            const FixedPoint near = solve_at_z(z_near, pr, cfg);
            const FixedPoint warm = solve_at_z(z, pr, cfg, &near.b);
            const double gap = std::max(std::abs(warm.m0 - cold.m0), inf_norm(warm.b - cold.b));
            record("warm_cold", z, gap, opts.warm_cold_max, gap < opts.warm_cold_max);
        } catch (const Error& e) {
            record("warm_cold", z, 0.0, opts.warm_cold_max, false, e.what());
        }

        if (cf) {
            try {
                const double gap = inf_norm((*cf)(a_check) - pr.b_update(a_check));
                record("closed_form", z, gap, opts.closed_form_max, gap < opts.closed_form_max);
            } catch (const Error& e) {
                record("closed_form", z, 0.0, opts.closed_form_max, false, e.what());
            }
        }
    }

    const cplx zbig(0.0, opts.asymptotic_im);
    try {
        const FixedPoint fp = solve_at_z(zbig, pr, cfg);
        const double v = std::abs(zbig * fp.m0 + 1.0);
        record("asymptotics", zbig, v, opts.asymptotic_max, v < opts.asymptotic_max, "|z m0(z) + 1|");
    } catch (const Error& e) {
        record("asymptotics", zbig, 0.0, opts.asymptotic_max, false, e.what());
    }
    for (auto& c : led.checks)
        if (!c.passed && c.detail.empty()) c.detail = "failed at z = " + z_text(c.z);
    return led;
}

}  // namespace varspec
