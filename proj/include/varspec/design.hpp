#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "varspec/model.hpp"

namespace varspec {

// Inclusion order of the subspaces S_0 = col(1_n) <= S_r <= S_k = R^n of a
// balanced design. Index 0 is the grand mean; 1..k are the random effects.
struct BalancedLattice {
    int k = 0;
    int n = 0;
    Eigen::MatrixXi zeta;    // zeta(t, r) = 1{t <= r}
    Eigen::MatrixXi mobius;  // inverse of zeta
    std::vector<int> dims;   // d_r = dim of S_r minus everything below it
    std::vector<int> sizes;  // I_r = dim S_r, I_0 = 1
    std::vector<double> coefs;  // c_r = n / I_r
    std::vector<int> succ;   // unique cover of t, or -1

    bool precedes(int t, int r) const { return zeta(t, r) != 0; }

    /// Builds the lattice from I_0..I_k and the order relation; derives
    /// mobius, dims and successors. Throws DegenerateDesign on an invalid order.
    static BalancedLattice from_order(int n, std::vector<int> sizes, Eigen::MatrixXi zeta);
};

struct EstimatorMatrix {
    int target = 0;  // 1-based component index
    Mat B;
    // B = sum_u beta_tu pi_u; empty for designs without a projection form.
    std::vector<std::pair<int, double>> as_projections;
};

struct OneWayDesign {
    std::vector<int> group_sizes;
    int n = 0;
    int I = 0;
    double K = 0.0;
    SpMat U1, U2;
    Mat pi0, pi1, pi2;
    Mat B1, B2;
    // (1/K)((1/I)(pi0 + pi1) - (1/(n-I)) pi2): the matrix whose spectral law
    // the one-way closed form describes. Differs from B1 by a rank-one plus
    // O(1/n) perturbation; equal laws in the limit.
    Mat B1_check;
};

struct BalancedDesign {
    BalancedLattice lattice;
    std::vector<SpMat> incidence;    // U_1..U_k
    std::vector<Mat> projections;    // pi_0..pi_k
    std::vector<EstimatorMatrix> estimators;  // t = 1..k
};

OneWayDesign build_oneway(const std::vector<int>& group_sizes);
BalancedDesign build_nested(const std::vector<int>& levels);
BalancedDesign build_crossed(int I, int J, int K, int L);

/// A DesignSpec turned into matrices.
struct Design {
    DesignSpec spec;
    int n = 0;
    std::vector<SpMat> incidence;
    std::optional<OneWayDesign> oneway;
    std::optional<BalancedDesign> balanced;
    std::optional<Mat> explicit_B;

    int k() const { return static_cast<int>(incidence.size()); }
    std::vector<int> sizes() const;
    /// Estimator matrix B_t used by the simulator (exact MANOVA form).
    const Mat& estimator(int t) const;
    /// Matrix whose F defines the theoretical law for target t.
    const Mat& law_matrix(int t) const;
};

Design realize(const DesignSpec& spec);

/// pi_0..pi_k for a balanced design or pi_0, pi_1, pi_2 for one-way.
std::vector<Mat> projections(const Design& design);

/// GeneralModel for estimator target t (uses law_matrix(t)).
GeneralModel to_general_model(const Design& design, const VarianceComponents& comps, int t);

/// Incidence matrix mapping each observation to its group (column).
SpMat incidence_from_labels(const std::vector<int>& labels, int groups);

}  // namespace varspec
