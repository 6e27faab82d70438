#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "varspec/closed_form.hpp"
#include "varspec/model.hpp"
#include "varspec/spectra.hpp"

namespace varspec {

/// Solution of the coupled equations at one spectral parameter z.
struct FixedPoint {
    cplx z;
    CVec a;
    CVec b;
    cplx m0;
    int iters = 0;
    double residual = 0.0;
    bool converged = false;
    // Residual and step size after every accepted update.
    std::vector<double> trajectory;
    std::vector<double> steps;
    // Smallest imaginary parts seen over all accepted iterates.
    double min_im_a = 0.0;
    double min_im_b = 0.0;
    double min_im_m0 = 0.0;
    int newton_steps = 0;
    double final_damping = 1.0;
};

class NoConvergenceError : public Error {
public:
    explicit NoConvergenceError(FixedPoint diag);
    const FixedPoint& diagnostics() const { return diag_; }

private:
    FixedPoint diag_;
};

/// The p x p side of the equations: a_r and m0 from b via the resolvent
/// (z Id + sum_s b_s Sigma_s)^{-1}. One factorization serves all r; when the
/// grams commute everything reduces to O(k p) scalar work.
class ResolventSide {
public:
    ResolventSide(std::vector<int> block_sizes, std::vector<Mat> grams);

    CVec a_update(cplx z, const CVec& b, cplx* m0 = nullptr) const;
    cplx m0(cplx z, const CVec& b) const;

    int k() const { return static_cast<int>(block_sizes_.size()); }
    int p() const { return p_; }
    const std::vector<int>& block_sizes() const { return block_sizes_; }
    bool diagonal() const { return !diag_.empty(); }
    /// Upper bound on ||Sigma_r||.
    double gram_norm(int r) const { return gram_norms_[r]; }

private:
    std::vector<int> block_sizes_;
    std::vector<Mat> grams_;
    std::vector<CMat> cgrams_;
    std::vector<Vec> diag_;  // spectra in a common eigenbasis when the grams commute
    std::vector<double> gram_norms_;
    int p_ = 0;
};

/// b-update on the n_+ side computed from an eigendecomposition
/// F = V diag(lambda) V^*, taken once: with G_r = V_r^* V_r,
///   Tr_r[(Id + F D(a))^{-1} F] = Tr[(Id + Lambda sum_s a_s G_s)^{-1} Lambda G_r],
/// a rank(F) x rank(F) system per call.
class BlockTraceOperator {
public:
    explicit BlockTraceOperator(const GeneralModel& model);

    CVec b_update(const CVec& a) const;
    int rank() const { return static_cast<int>(lambda_.size()); }
    double f_norm() const { return f_norm_; }

private:
    std::vector<int> block_sizes_;
    Vec lambda_;
    std::vector<CMat> lambda_g_;  // Lambda G_r
    double f_norm_ = 0.0;
};

/// a_r = -n_r^{-1} Tr((z Id + b.Sigma)^{-1} Sigma_r).
CVec a_update(cplx z, const CVec& b, const GeneralModel& model);

/// b_r = -n_r^{-1} Tr_r([Id + F D(a)]^{-1} F) by one dense n_+ x n_+ solve.
CVec b_update(const CVec& a, const GeneralModel& model);

/// m0 = -p^{-1} Tr((z Id + b.Sigma)^{-1}).
cplx m0_of(cplx z, const CVec& b, const GeneralModel& model);

using BUpdateFn = std::function<CVec(const CVec&)>;

/// Everything solve_at_z needs: the resolvent side plus a b-update strategy.
struct Problem {
    std::shared_ptr<const ResolventSide> resolvent;
    BUpdateFn b_update;
    double f_norm = 0.0;
    std::string strategy;

    int k() const { return resolvent->k(); }
    int p() const { return resolvent->p(); }
    /// Radius containing the support of mu_0:
    /// ||F|| sum_r ||Sigma_r|| (1 + sqrt(p / n_r))^2.
    double support_bound() const;

    /// Factorized general route (BlockTraceOperator).
    static Problem from_model(const GeneralModel& model);
    /// Literal dense route; O(n_+^3) per b-update.
    static Problem from_model_dense(const GeneralModel& model);
    static Problem from_closed_form(const ClosedFormUpdate& update, std::vector<int> block_sizes,
                                    std::vector<Mat> grams);
};

/// Runs the iteration and returns whatever it reached; converged reports
/// whether the stopping rule was met. Throws DomainViolation.
FixedPoint iterate_at_z(cplx z, const Problem& problem, const SolverConfig& cfg,
                        const CVec* warm_b = nullptr);

/// Direct attempt from warm_b, falling back to continuation in Im z from
/// max(1, |Re z|) downward. Throws NoConvergenceError with the diagnostics of
/// the direct attempt when neither reaches the stopping rule.
FixedPoint solve_at_z(cplx z, const Problem& problem, const SolverConfig& cfg,
                      const CVec* warm_b = nullptr);
FixedPoint solve_at_z(cplx z, const GeneralModel& model, const SolverConfig& cfg,
                      const CVec* warm_b = nullptr);

struct DensityRequest {
    std::vector<double> x_grid;
    double epsilon = 1e-4;

    void validate() const;
};

/// Sequential warm-started sweep. With threads > 1 the grid is cut into
/// contiguous chunks, each swept on its own thread.
SpectralDensity solve_grid(const DensityRequest& request, const Problem& problem,
                           const SolverConfig& cfg, int threads = 1);

struct AutoGridOptions {
    int scan_points = 801;
    int base_points = 2000;
    double support_threshold = 1e-6;
    double support_pad = 0.05;
    double edge_pad_eps = 100.0;  // extra padding in units of epsilon
    double refine_rtol = 1e-2;
    int max_points = 100000;
};

/// Density on an automatically chosen grid: coarse scan over the support
/// bound, support detection, then a uniform grid refined where linear
/// interpolation misses the midpoint value (down to epsilon / 4).
SpectralDensity auto_density(const Problem& problem, double epsilon, const SolverConfig& cfg,
                             const AutoGridOptions& opts = {});

std::vector<double> linspace(double lo, double hi, int count);

}  // namespace varspec
