#include "varspec/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace varspec {

namespace {

constexpr double kDomainSlack = 1e-10;

double inf_norm(const CVec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double min_imag(const CVec& v) {
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) m = std::min(m, v[i].imag());
    return m;
}

bool all_finite(const CVec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
    return true;
}

double row_sum_norm(const Mat& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

NoConvergenceError::NoConvergenceError(FixedPoint diag)
    : Error(ErrorCode::NoConvergence,
            [&] {
                std::ostringstream os;
                os << "no convergence at z = " << diag.z << " after " << diag.iters
                   << " iterations (residual " << diag.residual << ")";
                return os.str();
            }()),
      diag_(std::move(diag)) {}

// ---------------------------------------------------------------- resolvent

ResolventSide::ResolventSide(std::vector<int> block_sizes, std::vector<Mat> grams)
    : block_sizes_(std::move(block_sizes)), grams_(std::move(grams)) {
    require(!grams_.empty() && grams_.size() == block_sizes_.size(), ErrorCode::DimensionMismatch,
            "need one gram per block");
    p_ = static_cast<int>(grams_.front().rows());
    bool diag = true;
    for (const Mat& g : grams_) {
        require(g.rows() == p_ && g.cols() == p_, ErrorCode::DimensionMismatch,
                "grams must all be p x p");
        diag = diag && is_diagonal(g);
        gram_norms_.push_back(row_sum_norm(g));
    }
    if (diag) {
        for (const Mat& g : grams_) diag_.push_back(g.diagonal());
        grams_.clear();
        return;
    }

    // Commuting grams share an eigenbasis; the traces are rotation invariant,
    // so the diagonal path applies after one change of basis.
    for (std::size_t r = 0; r < grams_.size(); ++r)
        for (std::size_t s = r + 1; s < grams_.size(); ++s) {
            const double tol = 1e-12 * p_ * std::max(1.0, gram_norms_[r] * gram_norms_[s]);
            if ((grams_[r] * grams_[s] - grams_[s] * grams_[r]).cwiseAbs().maxCoeff() > tol) {
                for (const Mat& g : grams_) cgrams_.push_back(g.cast<cplx>());
                return;
            }
        }
    Mat mix = Mat::Zero(p_, p_);
    for (std::size_t r = 0; r < grams_.size(); ++r)
        mix += (1.0 + 0.6180339887498949 * static_cast<double>(r)) * grams_[r];
    Eigen::SelfAdjointEigenSolver<Mat> es(mix);
    std::vector<Vec> rotated;
    bool ok = es.info() == Eigen::Success;
    for (std::size_t r = 0; ok && r < grams_.size(); ++r) {
        Mat d = es.eigenvectors().transpose() * grams_[r] * es.eigenvectors();
        rotated.push_back(d.diagonal());
        d.diagonal().setZero();
        ok = d.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, gram_norms_[r]);
    }
    if (ok) {
        diag_ = std::move(rotated);
        grams_.clear();
    } else {
        for (const Mat& g : grams_) cgrams_.push_back(g.cast<cplx>());
    }
}

CVec ResolventSide::a_update(cplx z, const CVec& b, cplx* m0) const {
    const int k = this->k();
    require(b.size() == k, ErrorCode::DimensionMismatch, "b must have k entries");
    CVec a = CVec::Zero(k);
    cplx trace = 0.0;

    if (diagonal()) {
        for (int i = 0; i < p_; ++i) {
            cplx den = z;
            for (int s = 0; s < k; ++s) den += b[s] * diag_[s][i];
            if (den == cplx(0.0, 0.0)) {
                throw Error(ErrorCode::SingularResolvent, "z + b.Sigma has a zero diagonal entry");
            }
            const cplx inv = 1.0 / den;
            trace += inv;
            for (int r = 0; r < k; ++r) a[r] += diag_[r][i] * inv;
        }
    } else {
        CMat R = CMat::Identity(p_, p_) * z;
        for (int s = 0; s < k; ++s) R += b[s] * cgrams_[s];
        Eigen::PartialPivLU<CMat> lu(R);
        const CMat Rinv = lu.inverse();
        if (!Rinv.allFinite()) {
            throw Error(ErrorCode::SingularResolvent, "z Id + b.Sigma is singular");
        }
        trace = Rinv.trace();
        // Tr(Rinv Sigma_r) with Sigma_r symmetric
        for (int r = 0; r < k; ++r) a[r] = Rinv.cwiseProduct(cgrams_[r]).sum();
    }
    for (int r = 0; r < k; ++r) a[r] *= -1.0 / block_sizes_[r];
    if (!all_finite(a) || !std::isfinite(std::abs(trace))) {
        throw Error(ErrorCode::SingularResolvent, "non-finite resolvent trace");
    }
    if (m0) *m0 = -trace / static_cast<double>(p_);
    return a;
}

cplx ResolventSide::m0(cplx z, const CVec& b) const {
    cplx m;
    a_update(z, b, &m);
    return m;
}

// ------------------------------------------------------------ block traces

BlockTraceOperator::BlockTraceOperator(const GeneralModel& model)
    : block_sizes_(model.block_sizes) {
    const int np = model.n_plus();
    CMat V;
    Vec ev;
    if (model.F.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(model.F.real());
        require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "eigendecomposition of F failed");
        V = es.eigenvectors().cast<cplx>();
        ev = es.eigenvalues();
    } else {
        Eigen::SelfAdjointEigenSolver<CMat> es(model.F);
        require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "eigendecomposition of F failed");
        V = es.eigenvectors();
        ev = es.eigenvalues();
    }
    f_norm_ = np > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;

    const double cut = 1e-13 * std::max(f_norm_, 1e-300) * np;
    std::vector<int> keep;
    for (int i = 0; i < np; ++i)
        if (std::abs(ev[i]) > cut) keep.push_back(i);
    const int rank = static_cast<int>(keep.size());
    lambda_.resize(rank);
    CMat Vk(np, rank);
    for (int j = 0; j < rank; ++j) {
        lambda_[j] = ev[keep[j]];
        Vk.col(j) = V.col(keep[j]);
    }
    int off = 0;
    for (int n_r : block_sizes_) {
        const CMat Vr = Vk.middleRows(off, n_r);
        lambda_g_.push_back(lambda_.asDiagonal() * (Vr.adjoint() * Vr));
        off += n_r;
    }
}

CVec BlockTraceOperator::b_update(const CVec& a) const {
    const int k = static_cast<int>(block_sizes_.size());
    require(a.size() == k, ErrorCode::DimensionMismatch, "a must have k entries");
    CVec b = CVec::Zero(k);
    const int rank = this->rank();
    if (rank == 0) return b;

    if (k == 1) {
        // G_1 = Id: the system is diagonal
        cplx tr = 0.0;
        for (int i = 0; i < rank; ++i) {
            const cplx den = 1.0 + a[0] * lambda_[i];
            if (den == cplx(0.0, 0.0)) throw Error(ErrorCode::SingularSystem, "Id + F D(a) is singular");
            tr += lambda_[i] / den;
        }
        b[0] = -tr / static_cast<double>(block_sizes_[0]);
    } else {
        CMat A = CMat::Identity(rank, rank);
        for (int s = 0; s < k; ++s) A += a[s] * lambda_g_[s];
        Eigen::PartialPivLU<CMat> lu(A);
        const CMat Ainv = lu.inverse();
        if (!Ainv.allFinite()) throw Error(ErrorCode::SingularSystem, "Id + F D(a) is singular");
        for (int r = 0; r < k; ++r) {
            b[r] = -(Ainv.transpose().cwiseProduct(lambda_g_[r])).sum() /
                   static_cast<double>(block_sizes_[r]);
        }
    }
    if (!all_finite(b)) throw Error(ErrorCode::SingularSystem, "non-finite block trace");
    return b;
}

CVec a_update(cplx z, const CVec& b, const GeneralModel& model) {
    return ResolventSide(model.block_sizes, model.grams).a_update(z, b);
}

cplx m0_of(cplx z, const CVec& b, const GeneralModel& model) {
    return ResolventSide(model.block_sizes, model.grams).m0(z, b);
}

CVec b_update(const CVec& a, const GeneralModel& model) {
    const int k = model.k();
    require(a.size() == k, ErrorCode::DimensionMismatch, "a must have k entries");
    const int np = model.n_plus();
    CVec dvec(np);
    for (int r = 0, off = 0; r < k; off += model.block_sizes[r], ++r)
        dvec.segment(off, model.block_sizes[r]).setConstant(a[r]);

    const CMat M = CMat::Identity(np, np) + model.F * dvec.asDiagonal();
    Eigen::PartialPivLU<CMat> lu(M);
    const CMat X = lu.solve(model.F);
    if (!X.allFinite()) throw Error(ErrorCode::SingularSystem, "Id + F D(a) is singular");

    CVec b(k);
    for (int r = 0, off = 0; r < k; off += model.block_sizes[r], ++r) {
        b[r] = -X.diagonal().segment(off, model.block_sizes[r]).sum() /
               static_cast<double>(model.block_sizes[r]);
    }
    return b;
}

// ----------------------------------------------------------------- problems

double Problem::support_bound() const {
    double acc = 0.0;
    for (int r = 0; r < k(); ++r) {
        const double ratio = static_cast<double>(p()) / resolvent->block_sizes()[r];
        acc += resolvent->gram_norm(r) * std::pow(1.0 + std::sqrt(ratio), 2);
    }
    return f_norm * acc;
}

Problem Problem::from_model(const GeneralModel& model) {
    auto op = std::make_shared<const BlockTraceOperator>(model);
    Problem pr;
    pr.resolvent = std::make_shared<const ResolventSide>(model.block_sizes, model.grams);
    pr.f_norm = op->f_norm();
    pr.b_update = [op](const CVec& a) { return op->b_update(a); };
    pr.strategy = "factorized";
    return pr;
}

Problem Problem::from_model_dense(const GeneralModel& model) {
    auto m = std::make_shared<const GeneralModel>(model);
    Problem pr;
    pr.resolvent = std::make_shared<const ResolventSide>(model.block_sizes, model.grams);
    Eigen::SelfAdjointEigenSolver<CMat> es(model.F, Eigen::EigenvaluesOnly);
    pr.f_norm = model.n_plus() > 0 ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
    pr.b_update = [m](const CVec& a) { return varspec::b_update(a, *m); };
    pr.strategy = "dense";
    return pr;
}

Problem Problem::from_closed_form(const ClosedFormUpdate& update, std::vector<int> block_sizes,
                                  std::vector<Mat> grams) {
    require(static_cast<int>(block_sizes.size()) == update.k, ErrorCode::DimensionMismatch,
            "closed form and block sizes disagree on k");
    Problem pr;
    pr.resolvent = std::make_shared<const ResolventSide>(std::move(block_sizes), std::move(grams));
    pr.f_norm = update.f_norm;
    pr.b_update = [update](const CVec& a) { return update(a); };
    pr.strategy = "closed_form";
    return pr;
}

// ---------------------------------------------------------------- iteration

namespace {

struct Eval {
    CVec a;
    CVec gb;  // b-update applied to a
    cplx m0;
    double residual;
};

Eval evaluate(cplx z, const CVec& b, const Problem& pr) {
    Eval e;
    e.a = pr.resolvent->a_update(z, b, &e.m0);
    e.gb = pr.b_update(e.a);
    e.residual = inf_norm(e.gb - b);
    return e;
}

double scale_of(const CVec& a, const CVec& b) { return std::max({1.0, inf_norm(a), inf_norm(b)}); }

bool in_domain(const Eval& e, const CVec& b) {
    const double s = kDomainSlack * scale_of(e.a, b);
    return min_imag(e.a) >= -s && min_imag(b) >= -s && e.m0.imag() >= -kDomainSlack * std::abs(e.m0);
}

// Tiny negative imaginary parts from rounding are pulled back onto the axis.
void clip_to_closed_half_plane(CVec& b, double slack) {
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        if (b[i].imag() < 0.0 && b[i].imag() >= -slack) b[i].imag(0.0);
    }
}

// LU of Id - J with J a forward-difference Jacobian of b -> g(f(b)).
std::optional<Eigen::FullPivLU<CMat>> newton_system(cplx z, const CVec& b, const Eval& e, const Problem& pr) {
    const int k = static_cast<int>(b.size());
    CMat J(k, k);
    try {
        for (int j = 0; j < k; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(b[j]));
            CVec bj = b;
            bj[j] += h;
            const CVec aj = pr.resolvent->a_update(z, bj);
            J.col(j) = (pr.b_update(aj) - e.gb) / h;
        }
    } catch (const Error&) {
        return std::nullopt;
    }
    Eigen::FullPivLU<CMat> lu(CMat::Identity(k, k) - J);
    if (!lu.isInvertible()) return std::nullopt;
    return lu;
}

using NewtonSystem = std::optional<Eigen::FullPivLU<CMat>>;

}  // namespace

FixedPoint iterate_at_z(cplx z, const Problem& pr, const SolverConfig& cfg, const CVec* warm_b) {
    cfg.validate();
    require(z.imag() > 0.0, ErrorCode::InvalidArgument, "spectral parameter needs Im z > 0");
    const int k = pr.k();

    FixedPoint fp;
    fp.z = z;
    CVec b = CVec::Zero(k);
    if (warm_b) {
        require(warm_b->size() == k, ErrorCode::DimensionMismatch, "warm start must have k entries");
        b = *warm_b;
        clip_to_closed_half_plane(b, kDomainSlack * std::max(1.0, inf_norm(b)));
        if (min_imag(b) < 0.0) b = CVec::Zero(k);
    }

    Eval e = evaluate(z, b, pr);
    auto check_domain = [&](const Eval& ev, const CVec& bb) {
        if (!in_domain(ev, bb)) {
            std::ostringstream os;
            os << "iterate left the upper half plane at z = " << z << " (min Im a = " << min_imag(ev.a)
               << ", min Im b = " << min_imag(bb) << ", Im m0 = " << ev.m0.imag() << ")";
            throw Error(ErrorCode::DomainViolation, os.str());
        }
    };
    check_domain(e, b);
    fp.min_im_a = min_imag(e.a);
    fp.min_im_b = min_imag(b);
    fp.min_im_m0 = e.m0.imag();
    fp.trajectory.push_back(e.residual);

    double theta = cfg.damping;
    double best = e.residual;
    int stall = 0;
    double last_step = std::numeric_limits<double>::infinity();
    NewtonSystem system;

    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        const double tol_s = cfg.tol * scale_of(e.a, b);
        if (e.residual <= tol_s && last_step <= tol_s) {
            fp.converged = true;
            break;
        }

        CVec b_new;
        Eval e_new;
        bool moved = false;
        if (cfg.newton) {
            // The factorization is reused while it keeps halving the residual
            // and rebuilt once before giving up on a Newton step.
            for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
                const bool fresh = !system;
                if (fresh) system = newton_system(z, b, e, pr);
                if (!system) break;
                const CVec d = system->solve(e.gb - b);
                if (all_finite(d)) {
                    for (double lam : {1.0, 0.5, 0.25, 0.125}) {
                        CVec cand = b + lam * d;
                        clip_to_closed_half_plane(cand, kDomainSlack * std::max(1.0, inf_norm(cand)));
                        if (min_imag(cand) < 0.0) continue;
                        try {
                            Eval ec = evaluate(z, cand, pr);
                            if (!in_domain(ec, cand) || !(ec.residual < e.residual)) continue;
                            if (ec.residual > 0.5 * e.residual) system.reset();
                            b_new = std::move(cand);
                            e_new = std::move(ec);
                            moved = true;
                            ++fp.newton_steps;
                            break;
                        } catch (const Error&) {
                            continue;
                        }
                    }
                }
                if (!moved) system.reset();
                if (fresh) break;
            }
        }
        if (!moved) {
            b_new = theta * e.gb + (1.0 - theta) * b;
            clip_to_closed_half_plane(b_new, kDomainSlack * std::max(1.0, inf_norm(b_new)));
            e_new = evaluate(z, b_new, pr);
            check_domain(e_new, b_new);
        }

        last_step = std::max(inf_norm(b_new - b), inf_norm(e_new.a - e.a));
        b = std::move(b_new);
        e = std::move(e_new);
        fp.min_im_a = std::min(fp.min_im_a, min_imag(e.a));
        fp.min_im_b = std::min(fp.min_im_b, min_imag(b));
        fp.min_im_m0 = std::min(fp.min_im_m0, e.m0.imag());
        fp.trajectory.push_back(e.residual);
        fp.steps.push_back(last_step);

        if (e.residual < best) {
            best = e.residual;
            stall = 0;
        } else if (cfg.auto_damp && ++stall >= 50) {
            theta = std::max(theta / 2.0, 1.0 / 16.0);
            stall = 0;
        }
    }
    if (!fp.converged) {
        const double tol_s = cfg.tol * scale_of(e.a, b);
        fp.converged = e.residual <= tol_s && last_step <= tol_s;
    }
    fp.iters = it;
    fp.a = e.a;
    fp.b = b;
    fp.m0 = e.m0;
    fp.residual = e.residual;
    fp.final_damping = theta;
    return fp;
}

namespace {

// Budget for attempts that are expected to converge quadratically.
constexpr int kQuickIters = 200;

// Direct attempt first. Close to the real axis outside the bulk the map
// barely contracts and Newton from a poor start has no basin, so on failure
// Im z is walked down by halving from a height where the iteration is easy,
// each stage warm-starting the next.
FixedPoint continued_solve(cplx z, const Problem& pr, const SolverConfig& cfg, const CVec* warm) {
    SolverConfig quick = cfg;
    if (cfg.newton) quick.max_iters = std::min(cfg.max_iters, kQuickIters);
    FixedPoint direct = iterate_at_z(z, pr, quick, warm);
    if (direct.converged) return direct;
    int spent = direct.iters;

    const double top = std::max(1.0, std::abs(z.real()));
    CVec b;
    const CVec* w = nullptr;
    bool ok = true;
    for (double h = top; h > 2.0 * z.imag(); h /= 2.0) {
        const FixedPoint st = iterate_at_z(cplx(z.real(), h), pr, quick, w);
        spent += st.iters;
        if (!st.converged) {
            ok = false;
            break;
        }
        b = st.b;
        w = &b;
    }
    if (ok) {
        FixedPoint fin = iterate_at_z(z, pr, cfg, w);
        spent += fin.iters;
        if (fin.converged) {
            fin.iters = spent;
            return fin;
        }
    }
    direct.iters = spent;
    return direct;
}

}  // namespace

FixedPoint solve_at_z(cplx z, const Problem& pr, const SolverConfig& cfg, const CVec* warm_b) {
    FixedPoint fp = continued_solve(z, pr, cfg, warm_b);
    if (!fp.converged) throw NoConvergenceError(std::move(fp));
    return fp;
}

FixedPoint solve_at_z(cplx z, const GeneralModel& model, const SolverConfig& cfg, const CVec* warm_b) {
    return solve_at_z(z, Problem::from_model(model), cfg, warm_b);
}

// -------------------------------------------------------------------- grids

void DensityRequest::validate() const {
    require(!x_grid.empty(), ErrorCode::InvalidArgument, "density grid is empty");
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    for (std::size_t i = 1; i < x_grid.size(); ++i) {
        require(x_grid[i] > x_grid[i - 1], ErrorCode::InvalidArgument,
                "density grid must be strictly increasing");
    }
}

std::vector<double> linspace(double lo, double hi, int count) {
    require(count >= 1, ErrorCode::InvalidArgument, "linspace needs count >= 1");
    std::vector<double> x(count);
    if (count == 1) {
        x[0] = lo;
        return x;
    }
    const double h = (hi - lo) / (count - 1);
    for (int i = 0; i < count; ++i) x[i] = lo + h * i;
    x.back() = hi;
    return x;
}

namespace {

struct PointResult {
    double f = 0.0;
    bool converged = false;
    int iters = 0;
    CVec b;
};

PointResult solve_point(double x, double eps, const Problem& pr, const SolverConfig& cfg,
                        const CVec* warm) {
    const cplx z(x, eps);
    FixedPoint fp = continued_solve(z, pr, cfg, warm);
    PointResult r;
    r.f = std::max(0.0, fp.m0.imag()) / std::numbers::pi;
    r.converged = fp.converged;
    r.iters = fp.iters;
    r.b = std::move(fp.b);
    return r;
}

void sweep(const std::vector<double>& xs, std::size_t begin, std::size_t end, double eps,
           const Problem& pr, const SolverConfig& cfg, std::vector<PointResult>& out) {
    const CVec* warm = nullptr;
    for (std::size_t i = begin; i < end; ++i) {
        out[i] = solve_point(xs[i], eps, pr, cfg, warm);
        warm = out[i].converged ? &out[i].b : nullptr;
    }
}

SpectralDensity to_density(const std::vector<double>& xs, double eps,
                           const std::vector<PointResult>& res) {
    SpectralDensity d;
    d.grid = xs;
    d.epsilon = eps;
    for (const auto& r : res) {
        d.values.push_back(r.f);
        d.converged.push_back(r.converged);
        d.iterations.push_back(r.iters);
    }
    return d;
}

}  // namespace

SpectralDensity solve_grid(const DensityRequest& request, const Problem& pr, const SolverConfig& cfg,
                           int threads) {
    request.validate();
    cfg.validate();
    const std::size_t n = request.x_grid.size();
    std::vector<PointResult> res(n);
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (threads == 1) {
        sweep(request.x_grid, 0, n, request.epsilon, pr, cfg, res);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
            pool.emplace_back([&, t, lo, hi] {
                try {
                    sweep(request.x_grid, lo, hi, request.epsilon, pr, cfg, res);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return to_density(request.x_grid, request.epsilon, res);
}

SpectralDensity auto_density(const Problem& pr, double eps, const SolverConfig& cfg,
                             const AutoGridOptions& opts) {
    require(eps > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    // F = 0 gives mu_0 = delta_0, seen at width eps as a Cauchy bump
    const double R = 1.05 * std::max(pr.support_bound(), 1000.0 * eps);

    DensityRequest scan{linspace(-R, R, opts.scan_points), eps};
    const SpectralDensity coarse = solve_grid(scan, pr, cfg);
    auto [lo, hi] = detect_support(coarse, opts.support_threshold, opts.support_pad);
    lo -= opts.edge_pad_eps * eps;
    hi += opts.edge_pad_eps * eps;

    std::vector<double> xs = linspace(lo, hi, opts.base_points);
    std::vector<PointResult> res(xs.size());
    sweep(xs, 0, xs.size(), eps, pr, cfg, res);

    const double min_step = eps / 4.0;
    std::vector<bool> active(xs.size() - 1, true);
    bool changed = true;
    while (changed && static_cast<int>(xs.size()) < opts.max_points) {
        changed = false;
        std::vector<double> nx;
        std::vector<PointResult> nr;
        std::vector<bool> nactive;
        nx.reserve(xs.size() * 2);
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            nx.push_back(xs[i]);
            nr.push_back(std::move(res[i]));
            const double h = xs[i + 1] - xs[i];
            if (!active[i] || h <= 2.0 * min_step ||
                static_cast<int>(nx.size() + (xs.size() - i)) >= opts.max_points) {
                nactive.push_back(false);
                continue;
            }
            const double xm = 0.5 * (xs[i] + xs[i + 1]);
            const CVec* warm = nr.back().converged ? &nr.back().b : nullptr;
            PointResult mid = solve_point(xm, eps, pr, cfg, warm);
            const double lin = 0.5 * (nr.back().f + res[i + 1].f);
            const bool split = std::abs(mid.f - lin) > opts.refine_rtol * std::max(mid.f, lin);
            if (split) {
                nx.push_back(xm);
                nr.push_back(std::move(mid));
                nactive.push_back(true);
                nactive.push_back(true);
                changed = true;
            } else {
                nactive.push_back(false);
            }
        }
        nx.push_back(xs.back());
        nr.push_back(std::move(res.back()));
        xs = std::move(nx);
        res = std::move(nr);
        active = std::move(nactive);
    }
    return to_density(xs, eps, res);
}

}  // namespace varspec
