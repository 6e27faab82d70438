#pragma once

#include <cstdint>
#include <vector>

#include "varspec/design.hpp"
#include "varspec/spectra.hpp"

namespace varspec {

// Gaussian random-effects model Y = sum_r U_r G_r Sigma_r^{1/2}; fixed
// effects are annihilated by every estimator and are simulated as zero.
struct SimConfig {
    DesignSpec design;
    VarianceComponents components;
    std::uint64_t seed = 0;
    int replicates = 1;
    int target = 1;

    void validate() const;
};

/// Seed of the substream for (seed, replicate, effect).
std::uint64_t substream_seed(std::uint64_t seed, int replicate, int effect);

/// rows x cols standard normals from one substream.
Mat standard_normals(std::uint64_t stream_seed, int rows, int cols);

/// Symmetric PSD square root; rounded negative eigenvalues are clipped at 0.
Mat psd_sqrt(const Mat& sigma);

/// Y^T B_t Y via the design's structure (group sums, projections).
Mat manova_estimate(const Mat& Y, const Design& design, int t);

/// Y^T B_t Y with the dense n x n estimator matrix.
Mat manova_estimate_dense(const Mat& Y, const Design& design, int t);

/// One-way estimators from between/within sums of squares.
Mat oneway_ss_estimate(const Mat& Y, const OneWayDesign& design, int t);

/// Sorted eigenvalues of the symmetrized estimate.
EmpiricalSpectrum empirical_spectrum(const Mat& estimate);

class Simulator {
public:
    explicit Simulator(SimConfig cfg);

    const SimConfig& config() const { return cfg_; }
    const Design& design() const { return design_; }
    int p() const { return cfg_.components.p; }

    Mat sample_Y(int rep) const;
    Mat estimate(int rep) const;
    EmpiricalSpectrum replicate(int rep) const;
    /// All replicates; with threads > 1 they are spread over a pool but the
    /// result is identical to the sequential run.
    std::vector<EmpiricalSpectrum> run(int threads = 1) const;

private:
    SimConfig cfg_;
    Design design_;
    std::vector<Mat> roots_;
};

}  // namespace varspec
