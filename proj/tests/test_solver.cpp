#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "varspec/closed_form.hpp"
#include "varspec/solver.hpp"

using namespace varspec;

namespace {

GeneralModel mp_model(int p, int n, const Vec& sigma_diag) {
    return make_general_model(CMat::Identity(n, n), {n}, {Mat(sigma_diag.asDiagonal())});
}

GeneralModel random_model(std::mt19937& g, const std::vector<int>& blocks, int p, bool diag) {
    int np = 0;
    for (int b : blocks) np += b;
    std::normal_distribution<double> n01;
    Mat A(np, np);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j) A(i, j) = n01(g);
    const Mat F = (A + A.transpose()) / (2.0 * std::sqrt(static_cast<double>(np)));
    std::vector<Mat> grams;
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (std::size_t r = 0; r < blocks.size(); ++r) {
        if (diag) {
            Vec d(p);
            for (int i = 0; i < p; ++i) d[i] = u(g);
            grams.push_back(d.asDiagonal());
        } else {
            grams.push_back(oracle::random_psd(g, p));
        }
    }
    return make_general_model(F.cast<cplx>(), blocks, grams);
}

}  // namespace

TEST(AUpdate, ZeroSigmas) {
    const auto gm = make_general_model(CMat::Identity(4, 4), {2, 2}, {Mat::Zero(3, 3), Mat::Zero(3, 3)});
    std::mt19937 g(1);
    const CVec a = a_update(cplx(0.3, 1.0), oracle::upper_vec(g, 2), gm);
    EXPECT_EQ(a.cwiseAbs().maxCoeff(), 0.0);
}

TEST(AUpdate, ScalarResolvent) {
    const int p = 5, n = 8;
    const auto gm = mp_model(p, n, Vec::Ones(p));
    const cplx z(0.7, 0.4);
    const CVec a = a_update(z, CVec::Zero(1), gm);
    EXPECT_LT(std::abs(a[0] + static_cast<double>(p) / (static_cast<double>(n) * z)), 1e-15);
}

TEST(AUpdate, AgainstDenseInverse) {
    std::mt19937 g(4);
    for (bool diag : {true, false}) {
        const auto gm = random_model(g, {3, 5}, 4, diag);
        EXPECT_EQ(gm.diag_spectra.has_value(), diag);
        for (int s = 0; s < 10; ++s) {
            const cplx z = oracle::upper(g);
            const CVec b = oracle::upper_vec(g, 2);
            cplx m_or;
            const CVec a_or = oracle::resolvent_a(z, b, gm.grams, gm.block_sizes, &m_or);
            EXPECT_LT((a_update(z, b, gm) - a_or).cwiseAbs().maxCoeff(), 1e-13);
            EXPECT_LT(std::abs(m0_of(z, b, gm) - m_or), 1e-13);
        }
    }
}

TEST(BUpdate, SpecialCases) {
    std::mt19937 g(6);
    const auto gm = random_model(g, {3, 4}, 2, true);
    const CVec b0 = b_update(CVec::Zero(2), gm);
    EXPECT_LT(std::abs(b0[0] + gm.F.block(0, 0, 3, 3).trace() / 3.0), 1e-14);
    EXPECT_LT(std::abs(b0[1] + gm.F.block(3, 3, 4, 4).trace() / 4.0), 1e-14);

    const auto zero = make_general_model(CMat::Zero(5, 5), {2, 3}, gm.grams);
    EXPECT_EQ(b_update(oracle::upper_vec(g, 2), zero).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(BlockTraceOperator(zero).b_update(oracle::upper_vec(g, 2)).cwiseAbs().maxCoeff(), 0.0);

    const auto mp = mp_model(2, 6, Vec::Ones(2));
    const CVec a = oracle::upper_vec(g, 1);
    EXPECT_LT(std::abs(b_update(a, mp)[0] + 1.0 / (1.0 + a[0])), 1e-14);
    EXPECT_LT(std::abs(BlockTraceOperator(mp).b_update(a)[0] + 1.0 / (1.0 + a[0])), 1e-14);
}

TEST(BUpdate, DenseAndFactorizedAgainstOracle) {
    std::mt19937 g(12);
    for (const std::vector<int>& blocks : {std::vector<int>{6}, {3, 5}, {2, 4, 3}}) {
        const auto gm = random_model(g, blocks, 3, true);
        const BlockTraceOperator op(gm);
        for (int s = 0; s < 10; ++s) {
            const CVec a = oracle::upper_vec(g, static_cast<int>(blocks.size()));
            const CVec want = oracle::block_trace_b(gm.F, blocks, a);
            EXPECT_LT((b_update(a, gm) - want).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((op.b_update(a) - want).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(BUpdate, LowRankF) {
    // rank-2 F inside a 7-dimensional space
    std::mt19937 g(13);
    std::normal_distribution<double> n01;
    Mat V(7, 2);
    for (int i = 0; i < 7; ++i) V(i, 0) = n01(g), V(i, 1) = n01(g);
    const Mat F = V * Eigen::Vector2d(1.5, -0.7).asDiagonal() * V.transpose();
    const auto gm = make_general_model(F.cast<cplx>(), {3, 4}, {Mat::Identity(2, 2), Mat::Identity(2, 2)});
    const BlockTraceOperator op(gm);
    EXPECT_EQ(op.rank(), 2);
    const CVec a = oracle::upper_vec(g, 2);
    EXPECT_LT((op.b_update(a) - oracle::block_trace_b(gm.F, {3, 4}, a)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveAtZ, ZeroModelIsDeltaZero) {
    const auto gm = make_general_model(CMat::Zero(4, 4), {4}, {Mat::Identity(3, 3)});
    const cplx z(0.4, 0.3);
    const FixedPoint fp = solve_at_z(z, gm, SolverConfig{});
    EXPECT_EQ(fp.b[0], cplx(0.0));
    EXPECT_LT(std::abs(fp.m0 + 1.0 / z), 1e-15);
    EXPECT_LT(std::abs(fp.a[0] + 3.0 / (4.0 * z)), 1e-15);
}

TEST(SolveAtZ, MarcenkoPasturSquare) {
    const int n = 50;
    const auto gm = mp_model(n, n, Vec::Ones(n));
    const cplx z(2.0, 0.5);
    const FixedPoint fp = solve_at_z(z, gm, SolverConfig{});
    EXPECT_LT(std::abs(fp.m0 - oracle::mp_root(z, 1.0)), 1e-8);
    EXPECT_LE(fp.residual, 1e-12);
}

TEST(SolveAtZ, MarcenkoPasturReductionGeneralSigma) {
    std::mt19937 g(21);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    const int p = 30, n = 45;
    Vec s(p);
    for (int i = 0; i < p; ++i) s[i] = u(g);
    const auto gm = mp_model(p, n, s);
    const double gamma = static_cast<double>(p) / n;
    for (int i = 0; i < 10; ++i) {
        const cplx z = oracle::upper(g, 3.0);
        const FixedPoint fp = solve_at_z(z, gm, SolverConfig{});
        const cplx b1 = -1.0 + gamma + gamma * z * fp.m0;
        cplx m = 0.0;
        for (int j = 0; j < p; ++j) m += 1.0 / (z + b1 * s[j]);
        m *= -1.0 / p;
        EXPECT_LT(std::abs(m - fp.m0), 1e-8) << z;
    }
}

TEST(SolveAtZ, WarmColdAgreeAndDomain) {
    std::mt19937 g(31);
    const auto gm = random_model(g, {8, 12}, 6, false);
    const Problem pr = Problem::from_model(gm);
    SolverConfig cfg;
    for (int s = 0; s < 10; ++s) {
        const cplx z = oracle::upper(g, 2.0);
        const FixedPoint cold = solve_at_z(z, pr, cfg);
        const FixedPoint near = solve_at_z(z + cplx(0.1, 0.05), pr, cfg);
        const FixedPoint warm = solve_at_z(z, pr, cfg, &near.b);
        EXPECT_LT(std::abs(warm.m0 - cold.m0), 1e-10);
        EXPECT_LT((warm.b - cold.b).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_GE(cold.min_im_a, -1e-10);
        EXPECT_GE(cold.min_im_b, -1e-10);
        EXPECT_GT(cold.min_im_m0, 0.0);
    }
}

TEST(SolveAtZ, PlainAndNewtonIterationsAgree) {
    std::mt19937 g(41);
    const auto gm = random_model(g, {5, 7}, 4, true);
    const Problem pr = Problem::from_model(gm);
    SolverConfig plain;
    plain.newton = false;
    plain.max_iters = 100000;
    for (int s = 0; s < 5; ++s) {
        const cplx z(std::uniform_real_distribution<double>(-2, 2)(g), 0.5);
        const FixedPoint a = solve_at_z(z, pr, plain);
        const FixedPoint b = solve_at_z(z, pr, SolverConfig{});
        EXPECT_EQ(a.newton_steps, 0);
        EXPECT_LT(std::abs(a.m0 - b.m0), 1e-10);
    }
}

TEST(SolveAtZ, ContractionForLargeImaginaryPart) {
    std::mt19937 g(51);
    const auto gm = random_model(g, {6, 9}, 5, false);
    const Problem pr = Problem::from_model(gm);
    double sig = 0.0;
    for (int r = 0; r < 2; ++r) sig = std::max(sig, pr.resolvent->gram_norm(r));
    const double M = 10.0 * pr.f_norm * sig * 5.0 / 6.0;
    SolverConfig plain;
    plain.newton = false;
    const FixedPoint fp = solve_at_z(cplx(0.5, M), pr, plain);
    ASSERT_GE(fp.steps.size(), 4u);
    for (std::size_t i = 2; i < fp.steps.size(); ++i) {
        if (fp.steps[i - 1] < 1e-14) break;
        EXPECT_LT(fp.steps[i] / fp.steps[i - 1], 1.0) << "step " << i;
    }
}

TEST(SolveAtZ, NoConvergenceCarriesDiagnostics) {
    std::mt19937 g(61);
    const auto gm = random_model(g, {5, 7}, 4, true);
    SolverConfig cfg;
    cfg.max_iters = 2;
    cfg.newton = false;
    try {
        solve_at_z(cplx(0.1, 1e-4), gm, cfg);
        FAIL();
    } catch (const NoConvergenceError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
        EXPECT_EQ(e.diagnostics().trajectory.size(), 3u);
    }
    EXPECT_THROW(solve_at_z(cplx(0.1, 0.0), gm, SolverConfig{}), Error);
}

TEST(SolveAtZ, ClosedFormProblemMatchesGeneral) {
    const Design d = realize(NestedBalanced{{20, 2, 2}});
    std::mt19937 g(71);
    const auto vc = validate_components(std::vector<Mat>{oracle::random_psd(g, 4), oracle::random_psd(g, 4),
                                                         Mat::Identity(4, 4)});
    for (int t = 1; t <= 3; ++t) {
        const Problem gen = Problem::from_model(to_general_model(d, vc, t));
        const Problem cf = Problem::from_closed_form(*recognize(d, t), d.sizes(), vc.sigmas);
        for (cplx z : {cplx(0.2, 0.1), cplx(1.0, 0.01), cplx(-0.3, 0.5)}) {
            EXPECT_LT(std::abs(solve_at_z(z, gen, {}).m0 - solve_at_z(z, cf, {}).m0), 1e-10) << "t=" << t;
        }
    }
}

TEST(SolveGrid, CauchyKernelForZeroModel) {
    const auto gm = make_general_model(CMat::Zero(3, 3), {3}, {Mat::Identity(2, 2)});
    const double eps = 1e-4;
    const auto d = solve_grid({{0.0, 1.0}, eps}, Problem::from_model(gm), {});
    EXPECT_NEAR(d.values[0], 1.0 / (std::numbers::pi * eps), 1e-6);
    EXPECT_NEAR(d.values[1], eps / (std::numbers::pi * (1.0 + eps * eps)), 1e-16);
    EXPECT_TRUE(d.all_converged());
}

TEST(SolveGrid, MarcenkoPasturDensity) {
    const int p = 100, n = 200;
    const auto pr = Problem::from_model(mp_model(p, n, Vec::Ones(p)));
    const double eps = 1e-4;
    const auto x = linspace(0.0, 3.0, 301);
    const auto d = solve_grid({x, eps}, pr, {});
    const auto d2 = solve_grid({x, eps}, pr, {}, 3);
    ASSERT_TRUE(d.all_converged());
    const double lo = std::pow(1 - std::sqrt(0.5), 2), hi = std::pow(1 + std::sqrt(0.5), 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_GE(d.values[i], 0.0);
        EXPECT_LT(std::abs(d.values[i] - d2.values[i]), 1e-10);
        if (x[i] > lo + 0.05 && x[i] < hi - 0.05)
            EXPECT_NEAR(d.values[i], oracle::mp_density(x[i], 0.5), 1e-3) << x[i];
    }
}

TEST(SolveGrid, RejectsBadRequest) {
    const auto pr = Problem::from_model(mp_model(2, 4, Vec::Ones(2)));
    EXPECT_THROW(solve_grid({{}, 1e-4}, pr, {}), Error);
    EXPECT_THROW(solve_grid({{1.0, 0.5}, 1e-4}, pr, {}), Error);
    EXPECT_THROW(solve_grid({{1.0}, 0.0}, pr, {}), Error);
}

TEST(AutoDensity, MarcenkoPasturMassAndSupport) {
    const int p = 100, n = 200;
    const auto pr = Problem::from_model(mp_model(p, n, Vec::Ones(p)));
    const auto d = auto_density(pr, 1e-4, {});
    const double mass = density_mass(d);
    EXPECT_GT(mass, 0.98);
    EXPECT_LT(mass, 1.02);
    EXPECT_LT(d.grid.front(), std::pow(1 - std::sqrt(0.5), 2));
    EXPECT_GT(d.grid.back(), std::pow(1 + std::sqrt(0.5), 2));
}
