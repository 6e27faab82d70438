#include "varspec/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace varspec {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotPSD: return "NotPSD";
        case ErrorCode::AsymmetryTooLarge: return "AsymmetryTooLarge";
        case ErrorCode::DegenerateDesign: return "DegenerateDesign";
        case ErrorCode::SingularResolvent: return "SingularResolvent";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::DomainViolation: return "DomainViolation";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::EigenFailure: return "EigenFailure";
        case ErrorCode::RangeMismatch: return "RangeMismatch";
        case ErrorCode::MassDeficit: return "MassDeficit";
    }
    return "Unknown";
}

std::string design_kind(const DesignSpec& spec) {
    struct Visitor {
        std::string operator()(const OneWay&) const { return "one_way"; }
        std::string operator()(const NestedBalanced&) const { return "nested"; }
        std::string operator()(const CrossedTwoWay&) const { return "crossed"; }
        std::string operator()(const Explicit&) const { return "explicit"; }
    };
    return std::visit(Visitor{}, spec);
}

int GeneralModel::block_offset(int r) const {
    int off = 0;
    for (int s = 0; s < r; ++s) off += block_sizes[s];
    return off;
}

void SolverConfig::validate() const {
    require(tol > 0.0, ErrorCode::InvalidArgument, "solver tol must be positive");
    require(max_iters >= 1, ErrorCode::InvalidArgument, "solver max_iters must be >= 1");
    require(damping > 0.0 && damping <= 1.0, ErrorCode::InvalidArgument,
            "solver damping must lie in (0, 1]");
}

bool is_diagonal(const Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != 0.0) return false;
    return true;
}

VarianceComponents validate_components(std::span<const Mat> raw) {
    require(!raw.empty(), ErrorCode::InvalidArgument, "need at least one variance component");
    VarianceComponents out;
    out.p = static_cast<int>(raw.front().rows());
    require(out.p > 0, ErrorCode::DimensionMismatch, "components must be non-empty");

    for (std::size_t r = 0; r < raw.size(); ++r) {
        const Mat& s = raw[r];
        std::ostringstream tag;
        tag << "Sigma_" << (r + 1);
        require(s.rows() == s.cols(), ErrorCode::DimensionMismatch, tag.str() + " is not square");
        require(s.rows() == out.p, ErrorCode::DimensionMismatch,
                tag.str() + " has a different dimension than Sigma_1");
        require(s.allFinite(), ErrorCode::InvalidArgument, tag.str() + " has non-finite entries");

        const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
        const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
        require(asym <= 1e-10 * scale, ErrorCode::AsymmetryTooLarge,
                tag.str() + " asymmetry exceeds 1e-10 relative");

        Mat sym = s.triangularView<Eigen::Upper>();
        sym.triangularView<Eigen::StrictlyLower>() = sym.transpose();
        if (asym > 0.0) out.corrections.push_back(tag.str() + ": symmetrized");

        if (!is_diagonal(sym)) {
            Eigen::SelfAdjointEigenSolver<Mat> es(sym);
            require(es.info() == Eigen::Success, ErrorCode::EigenFailure,
                    tag.str() + " eigendecomposition failed");
            const Vec& ev = es.eigenvalues();
            const double norm = ev.cwiseAbs().maxCoeff();
            if (ev.minCoeff() < -1e-8 * norm) {
                throw Error(ErrorCode::NotPSD, tag.str() + " has a negative eigenvalue");
            }
            // eigenvalues at rounding level are left alone so a second pass is a no-op
            const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * out.p * norm;
            if (ev.minCoeff() < -rounding) {
                sym = es.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() *
                      es.eigenvectors().transpose();
                sym = 0.5 * (sym + sym.transpose()).eval();
                out.corrections.push_back(tag.str() + ": clipped negative eigenvalues");
            }
        } else {
            Vec d = sym.diagonal();
            const double norm = d.cwiseAbs().maxCoeff();
            if (d.minCoeff() < -1e-8 * norm) {
                throw Error(ErrorCode::NotPSD, tag.str() + " has a negative eigenvalue");
            }
            if (d.minCoeff() < 0.0) {
                sym.diagonal() = d.cwiseMax(0.0);
                out.corrections.push_back(tag.str() + ": clipped negative eigenvalues");
            }
        }
        out.sigmas.push_back(std::move(sym));
    }
    return out;
}

GeneralModel make_general_model(CMat F, std::vector<int> block_sizes, std::vector<Mat> grams) {
    require(!block_sizes.empty(), ErrorCode::InvalidArgument, "model needs k >= 1 blocks");
    require(block_sizes.size() == grams.size(), ErrorCode::DimensionMismatch,
            "number of grams must equal number of blocks");
    int total = 0;
    for (int n : block_sizes) {
        require(n > 0, ErrorCode::InvalidArgument, "block sizes must be positive");
        total += n;
    }
    require(F.rows() == total && F.cols() == total, ErrorCode::DimensionMismatch,
            "F dimension must equal the sum of block sizes");
    const double fscale = std::max(1.0, F.cwiseAbs().maxCoeff());
    require((F - F.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * fscale,
            ErrorCode::AsymmetryTooLarge, "F is not Hermitian");
    F = (0.5 * (F + F.adjoint())).eval();

    const auto p = grams.front().rows();
    for (const Mat& g : grams) {
        require(g.rows() == p && g.cols() == p, ErrorCode::DimensionMismatch,
                "grams must all be p x p");
    }
    auto comps = validate_components(grams);

    GeneralModel m;
    m.F = std::move(F);
    m.block_sizes = std::move(block_sizes);
    m.grams = std::move(comps.sigmas);
    bool all_diag = true;
    for (const Mat& g : m.grams) all_diag = all_diag && is_diagonal(g);
    if (all_diag) {
        std::vector<Vec> d;
        for (const Mat& g : m.grams) d.push_back(g.diagonal());
        m.diag_spectra = std::move(d);
    }
    return m;
}

GeneralModel to_general_model(std::span<const SpMat> incidence, const VarianceComponents& comps,
                              const Mat& B) {
    require(!incidence.empty(), ErrorCode::InvalidArgument, "need at least one incidence matrix");
    require(static_cast<int>(incidence.size()) == comps.k(), ErrorCode::DimensionMismatch,
            "number of incidence matrices must equal number of components");
    const auto n = incidence.front().rows();
    require(B.rows() == n && B.cols() == n, ErrorCode::DimensionMismatch,
            "B must be n x n with n the number of observations");

    std::vector<int> sizes;
    int total = 0;
    for (const SpMat& u : incidence) {
        require(u.rows() == n, ErrorCode::DimensionMismatch, "incidence matrices need n rows");
        sizes.push_back(static_cast<int>(u.cols()));
        total += static_cast<int>(u.cols());
    }

    // Scaled U and F = U^T B U, one column block at a time.
    Mat F(total, total);
    int col = 0;
    std::vector<Mat> BU;
    BU.reserve(incidence.size());
    for (std::size_t s = 0; s < incidence.size(); ++s) {
        const double w = std::sqrt(static_cast<double>(sizes[s]));
        BU.push_back(w * (B * incidence[s]));
    }
    int row = 0;
    for (std::size_t r = 0; r < incidence.size(); ++r) {
        const double w = std::sqrt(static_cast<double>(sizes[r]));
        col = 0;
        for (std::size_t s = 0; s < incidence.size(); ++s) {
            F.block(row, col, sizes[r], sizes[s]) = w * (incidence[r].transpose() * BU[s]);
            col += sizes[s];
        }
        row += sizes[r];
    }
    F = (0.5 * (F + F.transpose())).eval();
    return make_general_model(F.cast<cplx>(), sizes, comps.sigmas);
}

}  // namespace varspec
