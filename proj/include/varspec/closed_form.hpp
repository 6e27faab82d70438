#pragma once

#include <optional>
#include <span>
#include <vector>

#include "varspec/design.hpp"

namespace varspec {

// Design-specific b-updates. Every function takes the full k-vector a
// (index r-1 holds a_r) and returns the full k-vector b; components outside
// the active set come back as exact zeros.

/// One-way classification. target 1 describes the law of the modified
/// between-group estimator (OneWayDesign::B1_check), target 2 the residual one.
CVec oneway_b(const CVec& a, std::span<const int> group_sizes, int target);

/// Balanced nested classification with levels J_1..J_k.
CVec nested_b(const CVec& a, std::span<const int> levels, int target);

/// Replicated crossed two-way classification, components (1..5) =
/// (replicate, factor 1, factor 2, interaction, residual).
CVec crossed_b(const CVec& a, const CrossedTwoWay& design, int target);

/// Generic balanced-design update driven by the Mobius function of the lattice.
CVec balanced_general_b(const CVec& a, const BalancedLattice& lattice, int target);

/// Stieltjes transform of the Marcenko-Pastur law with aspect ratio gamma:
/// the root of gamma z m^2 + (z + gamma - 1) m + 1 = 0 in the upper half plane.
cplx mp_stieltjes(cplx z, double gamma);

/// Marcenko-Pastur density (absolutely continuous part) at real x.
double mp_density(double x, double gamma);

enum class ClosedFormKind { OneWay, Nested, Crossed, Lattice };

struct ClosedFormUpdate {
    ClosedFormKind kind = ClosedFormKind::Lattice;
    int target = 1;
    int k = 0;
    std::vector<int> group_sizes;  // OneWay
    std::vector<int> levels;       // Nested
    CrossedTwoWay crossed;         // Crossed
    std::optional<BalancedLattice> lattice;
    // 1-based component indices that can carry a non-zero b.
    std::vector<int> active;
    // Operator norm of the F matrix this update stands in for.
    double f_norm = 0.0;

    CVec operator()(const CVec& a) const;
};

/// Closed-form update for estimator target t of a design, if one exists.
std::optional<ClosedFormUpdate> recognize(const Design& design, int target);

ClosedFormUpdate lattice_update(const BalancedLattice& lattice, int target);

}  // namespace varspec
