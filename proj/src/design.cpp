#include "varspec/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace varspec {

SpMat incidence_from_labels(const std::vector<int>& labels, int groups) {
    SpMat u(static_cast<Eigen::Index>(labels.size()), groups);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        trips.emplace_back(static_cast<int>(i), labels[i], 1.0);
    }
    u.setFromTriplets(trips.begin(), trips.end());
    return u;
}

namespace {

SpMat sparse_identity(int n) {
    SpMat id(n, n);
    id.setIdentity();
    return id;
}

// Orthogonal projector onto col(U) for an incidence matrix with disjoint
// columns: U E^{-1} U^T where E = U^T U is diagonal.
Mat group_projector(const std::vector<int>& labels, const std::vector<int>& counts) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    Mat P = Mat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (labels[i] == labels[j]) P(i, j) = 1.0 / counts[labels[i]];
        }
    }
    return P;
}

std::vector<int> labels_of(const SpMat& u) {
    std::vector<int> labels(u.rows(), -1);
    for (int c = 0; c < u.outerSize(); ++c)
        for (SpMat::InnerIterator it(u, c); it; ++it) labels[it.row()] = c;
    return labels;
}

std::vector<int> column_counts(const std::vector<int>& labels, int groups) {
    std::vector<int> counts(groups, 0);
    for (int l : labels) ++counts[l];
    return counts;
}

BalancedDesign assemble_balanced(BalancedLattice lattice, std::vector<SpMat> incidence) {
    const int n = lattice.n;
    const int k = lattice.k;

    // Pi_r = c_r^{-1} U_r U_r^T is the projector onto S_r (orthonormal basis
    // U_r / sqrt(c_r)); peeling off the pieces below r leaves pi_r.
    std::vector<Mat> Pi(k + 1);
    Pi[0] = Mat::Constant(n, n, 1.0 / n);
    for (int r = 1; r <= k; ++r) {
        auto labels = labels_of(incidence[r - 1]);
        auto counts = column_counts(labels, static_cast<int>(incidence[r - 1].cols()));
        Pi[r] = group_projector(labels, counts);
    }

    std::vector<int> order(k + 1);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return lattice.sizes[a] < lattice.sizes[b]; });

    std::vector<Mat> pi(k + 1);
    for (int r : order) {
        pi[r] = Pi[r];
        for (int q = 0; q <= k; ++q) {
            if (q != r && lattice.precedes(q, r)) pi[r] -= pi[q];
        }
    }

    BalancedDesign out;
    for (int t = 1; t <= k; ++t) {
        EstimatorMatrix est;
        est.target = t;
        est.B = Mat::Zero(n, n);
        for (int u = 0; u <= k; ++u) {
            const int mu = lattice.mobius(t, u);
            if (mu == 0) continue;
            const double beta = mu / (lattice.coefs[t] * lattice.dims[u]);
            est.as_projections.emplace_back(u, beta);
            est.B += beta * pi[u];
        }
        out.estimators.push_back(std::move(est));
    }
    out.lattice = std::move(lattice);
    out.incidence = std::move(incidence);
    out.projections = std::move(pi);
    return out;
}

}  // namespace

BalancedLattice BalancedLattice::from_order(int n, std::vector<int> sizes, Eigen::MatrixXi zeta) {
    const int m = static_cast<int>(sizes.size());
    require(m >= 2, ErrorCode::DegenerateDesign, "lattice needs the mean plus at least one effect");
    require(zeta.rows() == m && zeta.cols() == m, ErrorCode::DimensionMismatch,
            "zeta must be (k+1) x (k+1)");
    for (int t = 0; t < m; ++t) {
        require(zeta(t, t) == 1, ErrorCode::DegenerateDesign, "order must be reflexive");
        for (int u = 0; u < m; ++u) {
            if (t != u && zeta(t, u) && zeta(u, t))
                throw Error(ErrorCode::DegenerateDesign, "order must be antisymmetric");
            for (int v = 0; v < m; ++v) {
                if (zeta(t, u) && zeta(u, v) && !zeta(t, v))
                    throw Error(ErrorCode::DegenerateDesign, "order must be transitive");
            }
            if (t != u && zeta(t, u) && sizes[t] >= sizes[u])
                throw Error(ErrorCode::DegenerateDesign, "strict inclusions must increase dimension");
        }
    }

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] < sizes[b]; });

    // mu(t, u) = -sum_{t <= v < u} mu(t, v), walking u upward.
    Eigen::MatrixXi mobius = Eigen::MatrixXi::Zero(m, m);
    for (int t = 0; t < m; ++t) {
        mobius(t, t) = 1;
        for (int u : order) {
            if (u == t || !zeta(t, u)) continue;
            int acc = 0;
            for (int v = 0; v < m; ++v) {
                if (v != u && zeta(t, v) && zeta(v, u)) acc += mobius(t, v);
            }
            mobius(t, u) = -acc;
        }
    }

    // I_u = sum_{r <= u} d_r, inverted.
    std::vector<int> dims(m, 0);
    for (int u = 0; u < m; ++u) {
        long acc = 0;
        for (int r = 0; r < m; ++r) {
            if (zeta(r, u)) acc += static_cast<long>(mobius(r, u)) * sizes[r];
        }
        require(acc > 0, ErrorCode::DegenerateDesign,
                "subspace " + std::to_string(u) + " has empty orthogonal part");
        dims[u] = static_cast<int>(acc);
    }
    require(std::accumulate(dims.begin(), dims.end(), 0) == n, ErrorCode::DegenerateDesign,
            "orthogonal parts do not decompose R^n");

    std::vector<int> succ(m, -1);
    for (int t = 0; t < m; ++t) {
        int cover = -1, covers = 0;
        for (int u = 0; u < m; ++u) {
            if (u == t || !zeta(t, u)) continue;
            bool direct = true;
            for (int v = 0; v < m; ++v) {
                if (v != t && v != u && zeta(t, v) && zeta(v, u)) direct = false;
            }
            if (direct) {
                cover = u;
                ++covers;
            }
        }
        if (covers == 1) succ[t] = cover;
    }

    BalancedLattice lat;
    lat.k = m - 1;
    lat.n = n;
    lat.zeta = std::move(zeta);
    lat.mobius = std::move(mobius);
    lat.dims = std::move(dims);
    lat.coefs.resize(m);
    for (int r = 0; r < m; ++r) lat.coefs[r] = static_cast<double>(n) / sizes[r];
    lat.sizes = std::move(sizes);
    lat.succ = std::move(succ);
    return lat;
}

OneWayDesign build_oneway(const std::vector<int>& group_sizes) {
    const int I = static_cast<int>(group_sizes.size());
    require(I >= 2, ErrorCode::DegenerateDesign, "one-way design needs at least 2 groups");
    int n = 0;
    double sumsq = 0.0;
    std::vector<int> labels;
    for (int i = 0; i < I; ++i) {
        require(group_sizes[i] >= 1, ErrorCode::DegenerateDesign, "group sizes must be >= 1");
        n += group_sizes[i];
        sumsq += static_cast<double>(group_sizes[i]) * group_sizes[i];
        labels.insert(labels.end(), group_sizes[i], i);
    }
    require(n - I >= 1, ErrorCode::DegenerateDesign, "one-way design needs n > I");

    OneWayDesign d;
    d.group_sizes = group_sizes;
    d.n = n;
    d.I = I;
    d.K = (n - sumsq / n) / (I - 1);
    d.U1 = incidence_from_labels(labels, I);
    d.U2 = sparse_identity(n);

    const Mat PU = group_projector(labels, group_sizes);
    d.pi0 = Mat::Constant(n, n, 1.0 / n);
    d.pi1 = PU - d.pi0;
    d.pi2 = Mat::Identity(n, n) - PU;

    const double nI = n - I;
    d.B1 = (d.pi1 / (I - 1.0) - d.pi2 / nI) / d.K;
    d.B2 = d.pi2 / nI;
    d.B1_check = ((d.pi0 + d.pi1) / static_cast<double>(I) - d.pi2 / nI) / d.K;
    return d;
}

BalancedDesign build_nested(const std::vector<int>& levels) {
    const int k = static_cast<int>(levels.size());
    require(k >= 1, ErrorCode::DegenerateDesign, "nested design needs at least one level");
    for (int J : levels) require(J >= 2, ErrorCode::DegenerateDesign, "nested levels must be >= 2");

    std::vector<int> sizes(k + 1, 1);
    for (int r = 1; r <= k; ++r) sizes[r] = sizes[r - 1] * levels[r - 1];
    const int n = sizes[k];

    Eigen::MatrixXi zeta = Eigen::MatrixXi::Zero(k + 1, k + 1);
    for (int t = 0; t <= k; ++t)
        for (int r = t; r <= k; ++r) zeta(t, r) = 1;

    std::vector<SpMat> incidence;
    for (int r = 1; r <= k; ++r) {
        const int c = n / sizes[r];
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) labels[i] = i / c;
        incidence.push_back(incidence_from_labels(labels, sizes[r]));
    }
    return assemble_balanced(BalancedLattice::from_order(n, sizes, zeta), std::move(incidence));
}

BalancedDesign build_crossed(int I, int J, int K, int L) {
    require(I >= 2 && J >= 2 && K >= 2 && L >= 2, ErrorCode::DegenerateDesign,
            "crossed design needs I, J, K, L >= 2");
    const int n = I * J * K * L;
    std::vector<int> sizes{1, I, I * J, I * K, I * J * K, n};

    // 0 < 1 < {2, 3} < 4 < 5
    Eigen::MatrixXi zeta(6, 6);
    zeta << 1, 1, 1, 1, 1, 1,
            0, 1, 1, 1, 1, 1,
            0, 0, 1, 0, 1, 1,
            0, 0, 0, 1, 1, 1,
            0, 0, 0, 0, 1, 1,
            0, 0, 0, 0, 0, 1;

    std::vector<std::vector<int>> labels(5, std::vector<int>(n));
    for (int i = 0; i < I; ++i)
        for (int j = 0; j < J; ++j)
            for (int kk = 0; kk < K; ++kk)
                for (int l = 0; l < L; ++l) {
                    const int o = ((i * J + j) * K + kk) * L + l;
                    labels[0][o] = i;
                    labels[1][o] = i * J + j;
                    labels[2][o] = i * K + kk;
                    labels[3][o] = (i * J + j) * K + kk;
                    labels[4][o] = o;
                }
    std::vector<SpMat> incidence;
    for (int r = 0; r < 5; ++r) incidence.push_back(incidence_from_labels(labels[r], sizes[r + 1]));
    return assemble_balanced(BalancedLattice::from_order(n, sizes, zeta), std::move(incidence));
}

std::vector<int> Design::sizes() const {
    std::vector<int> s;
    for (const SpMat& u : incidence) s.push_back(static_cast<int>(u.cols()));
    return s;
}

const Mat& Design::estimator(int t) const {
    if (explicit_B) return *explicit_B;
    require(t >= 1 && t <= k(), ErrorCode::InvalidArgument,
            "target must lie in 1.." + std::to_string(k()));
    if (oneway) return t == 1 ? oneway->B1 : oneway->B2;
    return balanced->estimators[t - 1].B;
}

const Mat& Design::law_matrix(int t) const {
    if (oneway && t == 1) return oneway->B1_check;
    return estimator(t);
}

Design realize(const DesignSpec& spec) {
    Design d;
    d.spec = spec;
    if (const auto* ow = std::get_if<OneWay>(&spec)) {
        d.oneway = build_oneway(ow->group_sizes);
        d.n = d.oneway->n;
        d.incidence = {d.oneway->U1, d.oneway->U2};
    } else if (const auto* ne = std::get_if<NestedBalanced>(&spec)) {
        d.balanced = build_nested(ne->levels);
        d.n = d.balanced->lattice.n;
        d.incidence = d.balanced->incidence;
    } else if (const auto* cr = std::get_if<CrossedTwoWay>(&spec)) {
        d.balanced = build_crossed(cr->I, cr->J, cr->K, cr->L);
        d.n = d.balanced->lattice.n;
        d.incidence = d.balanced->incidence;
    } else {
        const auto& ex = std::get<Explicit>(spec);
        require(ex.B.rows() == ex.B.cols() && ex.B.rows() > 0, ErrorCode::DimensionMismatch,
                "explicit B must be square");
        const double scale = std::max(1.0, ex.B.cwiseAbs().maxCoeff());
        require((ex.B - ex.B.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                ErrorCode::AsymmetryTooLarge, "explicit B must be symmetric");
        require(!ex.U.empty(), ErrorCode::InvalidArgument, "explicit design needs incidence matrices");
        d.n = static_cast<int>(ex.B.rows());
        for (const Mat& u : ex.U) {
            require(u.rows() == d.n && u.cols() > 0, ErrorCode::DimensionMismatch,
                    "each explicit U_r must have n rows");
            d.incidence.push_back(u.sparseView());
        }
        d.explicit_B = (0.5 * (ex.B + ex.B.transpose())).eval();
    }
    return d;
}

std::vector<Mat> projections(const Design& design) {
    if (design.oneway) return {design.oneway->pi0, design.oneway->pi1, design.oneway->pi2};
    require(design.balanced.has_value(), ErrorCode::InvalidArgument,
            "projections need a one-way or balanced design");
    return design.balanced->projections;
}

GeneralModel to_general_model(const Design& design, const VarianceComponents& comps, int t) {
    return to_general_model(design.incidence, comps, design.law_matrix(t));
}

}  // namespace varspec
