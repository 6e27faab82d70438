#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "varspec/common.hpp"

namespace varspec {

// Covariances Sigma_1..Sigma_k of the random effects, all p x p, symmetric and PSD.
struct VarianceComponents {
    std::vector<Mat> sigmas;
    int p = 0;
    // Human-readable log of symmetrization / clipping applied on ingest.
    std::vector<std::string> corrections;

    int k() const { return static_cast<int>(sigmas.size()); }
};

// Classification designs. Explicit carries its own estimator matrix B and
// incidence matrices; B X = 0 for the (unmodelled) fixed effects is the
// caller's responsibility.
struct OneWay {
    std::vector<int> group_sizes;
};
struct NestedBalanced {
    std::vector<int> levels;
};
struct CrossedTwoWay {
    int I = 0, J = 0, K = 0, L = 0;
};
struct Explicit {
    Mat B;
    std::vector<Mat> U;
};
using DesignSpec = std::variant<OneWay, NestedBalanced, CrossedTwoWay, Explicit>;

std::string design_kind(const DesignSpec& spec);

// Input of the fixed-point solver:
//   W = sum_{r,s} H_r^* G_r^* F_rs G_s H_s,   grams[r] = H_r^* H_r.
// F is Hermitian and partitioned into blocks of sizes n_1..n_k.
struct GeneralModel {
    CMat F;
    std::vector<int> block_sizes;
    std::vector<Mat> grams;
    // Diagonals of the grams, present iff every gram is diagonal.
    std::optional<std::vector<Vec>> diag_spectra;

    int k() const { return static_cast<int>(block_sizes.size()); }
    int p() const { return grams.empty() ? 0 : static_cast<int>(grams.front().rows()); }
    int n_plus() const { return static_cast<int>(F.rows()); }
    int block_offset(int r) const;
};

struct SolverConfig {
    double tol = 1e-12;
    int max_iters = 5000;
    double damping = 1.0;
    bool auto_damp = true;
    // Safeguarded Newton steps on b; plain fixed-point iteration when false.
    bool newton = true;

    void validate() const;
};

/// Symmetrize (upper triangle wins), check PSD, clip tiny negative
/// eigenvalues. Throws DimensionMismatch, AsymmetryTooLarge or NotPSD.
VarianceComponents validate_components(std::span<const Mat> raw);

bool is_diagonal(const Mat& m);

/// Validates and assembles a GeneralModel; fills diag_spectra when possible.
GeneralModel make_general_model(CMat F, std::vector<int> block_sizes, std::vector<Mat> grams);

/// F = U^T B U with U = (sqrt(I_1) U_1 | ... | sqrt(I_k) U_k), n_r = I_r and
/// grams = Sigma_r.
GeneralModel to_general_model(std::span<const SpMat> incidence, const VarianceComponents& comps,
                              const Mat& B);

}  // namespace varspec
