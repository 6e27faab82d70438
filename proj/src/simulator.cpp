#include "varspec/simulator.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

namespace varspec {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// uniform on (0, 1]
double unit_open_left(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 1.0) * 0x1.0p-53;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void SimConfig::validate() const {
    require(replicates >= 1, ErrorCode::InvalidArgument, "replicates must be >= 1");
    require(components.k() >= 1 && components.p >= 1, ErrorCode::InvalidArgument,
            "need at least one p x p variance component");
}

std::uint64_t substream_seed(std::uint64_t seed, int replicate, int effect) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(replicate) + 1) * 0xD1B54A32D192ED03ULL);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(effect) + 1) * 0xC2B2AE3D27D4EB4FULL);
    return h;
}

Mat standard_normals(std::uint64_t stream_seed, int rows, int cols) {
    std::mt19937_64 g(stream_seed);
    Mat out(rows, cols);
    double* v = out.data();
    const Eigen::Index total = out.size();
    constexpr double two_pi = 6.283185307179586476925;
    for (Eigen::Index i = 0; i < total; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(unit_open_left(g)));
        const double th = two_pi * unit_open_left(g);
        v[i] = r * std::cos(th);
        if (i + 1 < total) v[i + 1] = r * std::sin(th);
    }
    return out;
}

Mat psd_sqrt(const Mat& sigma) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sigma));
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "eigendecomposition of Sigma failed");
    const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Mat oneway_ss_estimate(const Mat& Y, const OneWayDesign& d, int t) {
    require(Y.rows() == d.n, ErrorCode::DimensionMismatch, "Y must have n rows");
    require(t == 1 || t == 2, ErrorCode::InvalidArgument, "one-way target must be 1 or 2");
    const Eigen::Index p = Y.cols();
    const Vec grand = Y.colwise().mean().transpose();

    Mat means = Mat::Zero(d.I, p);
    std::vector<int> label(d.n);
    for (int i = 0, row = 0; i < d.I; ++i) {
        for (int j = 0; j < d.group_sizes[i]; ++j, ++row) {
            label[row] = i;
            means.row(i) += Y.row(row);
        }
        means.row(i) /= d.group_sizes[i];
    }
    Mat within = Y;
    for (int row = 0; row < d.n; ++row) within.row(row) -= means.row(label[row]);
    const Mat ss2 = within.transpose() * within;
    if (t == 2) return symmetrize(ss2 / (d.n - d.I));

    Mat between = means.rowwise() - grand.transpose();
    for (int i = 0; i < d.I; ++i) between.row(i) *= std::sqrt(static_cast<double>(d.group_sizes[i]));
    const Mat ss1 = between.transpose() * between;
    return symmetrize((ss1 / (d.I - 1.0) - ss2 / (d.n - d.I)) / d.K);
}

Mat manova_estimate_dense(const Mat& Y, const Design& design, int t) {
    const Mat& B = design.estimator(t);
    require(Y.rows() == B.rows(), ErrorCode::DimensionMismatch, "Y must have n rows");
    return symmetrize(Y.transpose() * (B * Y));
}

Mat manova_estimate(const Mat& Y, const Design& design, int t) {
    require(Y.rows() == design.n, ErrorCode::DimensionMismatch, "Y must have n rows");
    if (design.oneway) return oneway_ss_estimate(Y, *design.oneway, t);
    if (!design.balanced) return manova_estimate_dense(Y, design, t);

    const BalancedDesign& bd = *design.balanced;
    const BalancedLattice& lat = bd.lattice;
    require(t >= 1 && t <= lat.k, ErrorCode::InvalidArgument, "target out of range");
    const Eigen::Index p = Y.cols();

    // Y^T Pi_r Y = (U_r^T Y)^T (U_r^T Y) / c_r
    std::vector<Mat> M(lat.k + 1);
    const Vec colsum = Y.colwise().sum().transpose();
    M[0] = colsum * colsum.transpose() / lat.n;
    for (int r = 1; r <= lat.k; ++r) {
        const Mat s = bd.incidence[r - 1].transpose() * Y;
        M[r] = s.transpose() * s / lat.coefs[r];
    }
    Mat out = Mat::Zero(p, p);
    for (const auto& [u, beta] : bd.estimators[t - 1].as_projections) {
        for (int q = 0; q <= lat.k; ++q) {
            const int mu = lat.mobius(q, u);
            if (mu != 0) out += (beta * mu) * M[q];
        }
    }
    return symmetrize(out);
}

EmpiricalSpectrum empirical_spectrum(const Mat& estimate) {
    require(estimate.rows() == estimate.cols() && estimate.rows() > 0, ErrorCode::DimensionMismatch,
            "estimate must be square");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(estimate), Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "symmetric eigensolver failed");
    EmpiricalSpectrum s;
    s.p = static_cast<int>(estimate.rows());
    s.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + s.p);
    return s;
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)), design_(realize(cfg_.design)) {
    cfg_.validate();
    require(cfg_.components.k() == design_.k(), ErrorCode::DimensionMismatch,
            "number of variance components must match the design");
    require(cfg_.target >= 1 && cfg_.target <= design_.k(), ErrorCode::InvalidArgument,
            "target out of range");
    for (const Mat& s : cfg_.components.sigmas) {
        require(s.rows() == cfg_.components.p && s.cols() == cfg_.components.p,
                ErrorCode::DimensionMismatch, "variance components must be p x p");
        roots_.push_back(psd_sqrt(s));
    }
}

Mat Simulator::sample_Y(int rep) const {
    const int p = this->p();
    Mat Y = Mat::Zero(design_.n, p);
    for (int r = 0; r < design_.k(); ++r) {
        const SpMat& U = design_.incidence[r];
        const Mat G = standard_normals(substream_seed(cfg_.seed, rep, r), static_cast<int>(U.cols()), p);
        Y += U * (G * roots_[r]);
    }
    return Y;
}

Mat Simulator::estimate(int rep) const { return manova_estimate(sample_Y(rep), design_, cfg_.target); }

EmpiricalSpectrum Simulator::replicate(int rep) const {
    EmpiricalSpectrum s = empirical_spectrum(estimate(rep));
    s.design = design_kind(cfg_.design);
    s.seed = cfg_.seed;
    s.replicate = rep;
    return s;
}

std::vector<EmpiricalSpectrum> Simulator::run(int threads) const {
    std::vector<EmpiricalSpectrum> out(cfg_.replicates);
    threads = std::max(1, std::min(threads, cfg_.replicates));
    if (threads == 1) {
        for (int r = 0; r < cfg_.replicates; ++r) out[r] = replicate(r);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int r = next++; r < cfg_.replicates; r = next++) out[r] = replicate(r);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace varspec
