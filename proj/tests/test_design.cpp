#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varspec/design.hpp"

using namespace varspec;

namespace {

int rank_of(const Mat& m) {
    Eigen::FullPivLU<Mat> lu(m);
    lu.setThreshold(1e-9);
    return static_cast<int>(lu.rank());
}

void expect_projection_family(const std::vector<Mat>& pi, const std::vector<int>& dims) {
    const auto n = pi.front().rows();
    Mat sum = Mat::Zero(n, n);
    for (std::size_t r = 0; r < pi.size(); ++r) {
        EXPECT_LT((pi[r] - pi[r].transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((pi[r] * pi[r] - pi[r]).cwiseAbs().maxCoeff(), 1e-12) << "r = " << r;
        EXPECT_EQ(rank_of(pi[r]), dims[r]) << "r = " << r;
        for (std::size_t s = 0; s < r; ++s) EXPECT_LT((pi[r] * pi[s]).cwiseAbs().maxCoeff(), 1e-12);
        sum += pi[r];
    }
    EXPECT_LT((sum - Mat::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace

TEST(OneWay, ProjectionCompleteness) {
    const auto ow = build_oneway({2, 2});
    expect_projection_family({ow.pi0, ow.pi1, ow.pi2}, {1, 1, 2});
    EXPECT_LT((ow.pi0 - Mat::Constant(4, 4, 0.25)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OneWay, BalancedK) {
    EXPECT_DOUBLE_EQ(build_oneway({5, 5, 5, 5}).K, 5.0);
    EXPECT_DOUBLE_EQ(build_oneway({3, 3}).K, 3.0);
    // unbalanced: (n - sum J^2 / n) / (I - 1)
    const auto ow = build_oneway({1, 3});
    EXPECT_DOUBLE_EQ(ow.K, (4.0 - 10.0 / 4.0) / 1.0);
}

TEST(OneWay, EstimatorsMatchHandBuiltProjectors) {
    const std::vector<int> J{1, 3, 2};
    const auto ow = build_oneway(J);
    const Mat U1 = oracle::incidence({0, 1, 1, 1, 2, 2}, 3);
    const int n = 6, I = 3;
    const Mat PU = oracle::col_projector(U1);
    const Mat P0 = Mat::Constant(n, n, 1.0 / n);
    const Mat pi1 = PU - P0, pi2 = Mat::Identity(n, n) - PU;
    const double K = (n - (1.0 + 9.0 + 4.0) / n) / (I - 1);
    const Mat B1 = (pi1 / (I - 1.0) - pi2 / (n - I)) / K;
    EXPECT_LT((ow.B1 - B1).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((ow.B2 - pi2 / (n - I)).cwiseAbs().maxCoeff(), 1e-12);
    const Mat Bc = ((P0 + pi1) / I - pi2 / (n - I)) / K;
    EXPECT_LT((ow.B1_check - Bc).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OneWay, TraceTwoWays) {
    const auto ow = build_oneway({1, 3});
    const Mat U1 = Mat(ow.U1);
    const double dense = (U1.transpose() * ow.B1 * U1).trace();
    // projection form: Tr(U^T pi1 U) = Tr(pi1 U U^T), Tr(U^T pi2 U) = 0
    const double proj = (ow.pi1 * U1 * U1.transpose()).trace() / ((ow.I - 1.0) * ow.K) -
                        (ow.pi2 * U1 * U1.transpose()).trace() / ((ow.n - ow.I) * ow.K);
    EXPECT_NEAR(dense, proj, 1e-12);
    // unbiasedness: Tr(U1^T B1 U1) = 1, Tr(B1) = 0
    EXPECT_NEAR(dense, 1.0, 1e-12);
    EXPECT_NEAR(ow.B1.trace(), 0.0, 1e-12);
}

TEST(OneWay, Degenerate) {
    EXPECT_THROW(build_oneway({4}), Error);
    EXPECT_THROW(build_oneway({1, 1}), Error);
    EXPECT_THROW(build_oneway({2, 0}), Error);
}

TEST(Nested, MobiusBidiagonal) {
    const auto bd = build_nested({3, 2, 2});
    const auto& lat = bd.lattice;
    for (int t = 0; t <= 3; ++t)
        for (int u = 0; u <= 3; ++u) {
            const int want = (u == t) ? 1 : (u == t + 1 ? -1 : 0);
            EXPECT_EQ(lat.mobius(t, u), want) << t << "," << u;
        }
    EXPECT_EQ(lat.dims, (std::vector<int>{1, 2, 3, 6}));
    EXPECT_EQ(lat.n, 12);
    EXPECT_EQ((lat.zeta * lat.mobius), Eigen::MatrixXi::Identity(4, 4));
}

TEST(Nested, EstimatorFormula) {
    const std::vector<int> J{3, 2, 2};
    const auto bd = build_nested(J);
    const int n = 12, k = 3;
    for (int t = 1; t <= k; ++t) {
        Mat B = (J[t - 1] / (n * (J[t - 1] - 1.0))) * bd.projections[t];
        if (t < k) B -= (1.0 / (n * (J[t] - 1.0))) * bd.projections[t + 1];
        EXPECT_LT((bd.estimators[t - 1].B - B).cwiseAbs().maxCoeff(), 1e-13) << "t = " << t;
    }
}

TEST(Nested, ProjectionsAgainstAveragingOperators) {
    const auto bd = build_nested({2, 2});
    expect_projection_family(bd.projections, {1, 1, 2});
    // S_1 spanned by the two halves of the 4 observations
    const Mat U1 = oracle::incidence({0, 0, 1, 1}, 2);
    const Mat P1 = oracle::col_projector(U1);
    EXPECT_LT((bd.projections[0] + bd.projections[1] - P1).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Nested, Degenerate) {
    EXPECT_THROW(build_nested({3, 1}), Error);
    EXPECT_THROW(build_nested({}), Error);
}

TEST(Crossed, MobiusTable) {
    const auto bd = build_crossed(2, 2, 2, 2);
    Eigen::MatrixXi want(5, 5);
    want << 1, -1, -1, 1, 0,
            0, 1, 0, -1, 0,
            0, 0, 1, -1, 0,
            0, 0, 0, 1, -1,
            0, 0, 0, 0, 1;
    EXPECT_EQ(bd.lattice.mobius.bottomRightCorner(5, 5), want);
    EXPECT_EQ(bd.lattice.dims, (std::vector<int>{1, 1, 2, 2, 2, 8}));
    expect_projection_family(bd.projections, bd.lattice.dims);
    EXPECT_EQ(bd.lattice.succ[2], 4);
    EXPECT_EQ(bd.lattice.succ[3], 4);
    EXPECT_EQ(bd.lattice.succ[4], 5);
}

TEST(Crossed, SigmaTwoProjectionForm) {
    const int I = 2, J = 3, K = 2, L = 2;
    const auto bd = build_crossed(I, J, K, L);
    const Mat B = bd.projections[2] / (I * (J - 1.0) * K * L) -
                  bd.projections[4] / (I * (J - 1.0) * (K - 1.0) * K * L);
    EXPECT_LT((bd.estimators[1].B - B).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Balanced, TraceStructureAndUnbiasedness) {
    for (const auto& bd : {build_nested({3, 2, 2}), build_crossed(2, 3, 2, 2)}) {
        const auto& lat = bd.lattice;
        for (int r = 1; r <= lat.k; ++r) {
            const Mat U = Mat(bd.incidence[r - 1]);
            for (int t = 0; t <= lat.k; ++t) {
                const double tr = (U.transpose() * bd.projections[t] * U).trace();
                const double want = lat.precedes(t, r) ? lat.coefs[r] * lat.dims[t] : 0.0;
                EXPECT_NEAR(tr, want, 1e-10) << "r = " << r << ", t = " << t;
            }
            for (int t = 1; t <= lat.k; ++t) {
                const double tr = (U.transpose() * bd.estimators[t - 1].B * U).trace();
                EXPECT_NEAR(tr, t == r ? 1.0 : 0.0, 1e-10) << "r = " << r << ", t = " << t;
            }
        }
        EXPECT_NEAR(bd.estimators[0].B.sum(), 0.0, 1e-10);  // B 1 = 0
    }
}

TEST(Lattice, RejectsInvalidOrder) {
    Eigen::MatrixXi z = Eigen::MatrixXi::Identity(3, 3);
    z(0, 1) = z(1, 2) = 1;  // missing transitivity 0 <= 2
    EXPECT_THROW(BalancedLattice::from_order(4, {1, 2, 4}, z), Error);
}

TEST(Realize, Kinds) {
    EXPECT_EQ(design_kind(OneWay{{2, 2}}), "one_way");
    EXPECT_EQ(realize(CrossedTwoWay{2, 2, 2, 2}).n, 16);
    EXPECT_EQ(realize(NestedBalanced{{3, 2}}).sizes(), (std::vector<int>{3, 6}));
    Explicit ex{Mat::Identity(3, 3), {Mat::Identity(3, 3)}};
    const Design d = realize(ex);
    EXPECT_EQ(d.estimator(1), Mat::Identity(3, 3));
    ex.B(0, 1) = 1.0;
    EXPECT_THROW(realize(ex), Error);
}
