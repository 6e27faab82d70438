#include "varspec/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace varspec {

namespace {

cplx checked_inv(cplx den, const char* where) {
    if (den == cplx(0.0, 0.0) || !std::isfinite(std::abs(den))) {
        throw Error(ErrorCode::ZeroDenominator, where);
    }
    return 1.0 / den;
}

void check_target(int target, int k) {
    require(target >= 1 && target <= k, ErrorCode::InvalidArgument,
            "target must lie in 1.." + std::to_string(k));
}

// Sum of a_r over components r >= u (1-based u) in a chain.
cplx tail_sum(const CVec& a, int u) {
    cplx s = 0.0;
    for (Eigen::Index j = u - 1; j < a.size(); ++j) s += a[j];
    return s;
}

}  // namespace

CVec oneway_b(const CVec& a, std::span<const int> group_sizes, int target) {
    require(a.size() == 2, ErrorCode::DimensionMismatch, "one-way update needs k = 2");
    check_target(target, 2);
    const int I = static_cast<int>(group_sizes.size());
    require(I >= 2, ErrorCode::DegenerateDesign, "one-way design needs at least 2 groups");
    double n = 0.0, sumsq = 0.0;
    for (int J : group_sizes) {
        n += J;
        sumsq += static_cast<double>(J) * J;
    }
    require(n > I, ErrorCode::DegenerateDesign, "one-way design needs n > I");

    CVec b = CVec::Zero(2);
    if (target == 2) {
        b[1] = -(n - I) * checked_inv(n - I + n * a[1], "oneway_b: n - I + n a_2");
        return b;
    }
    const double K = (n - sumsq / n) / (I - 1);
    cplx s1 = 0.0, s2 = 0.0;
    for (int J : group_sizes) {
        const cplx inv = checked_inv(K * I + static_cast<double>(I) * J * a[0] + n * a[1],
                                     "oneway_b: KI + I J_i a_1 + n a_2");
        s1 += static_cast<double>(J) * inv;
        s2 += inv;
    }
    b[0] = -s1;
    b[1] = (n - I) * checked_inv(K * (n - I) - n * a[1], "oneway_b: K(n - I) - n a_2") - s2;
    return b;
}

CVec nested_b(const CVec& a, std::span<const int> levels, int target) {
    const int k = static_cast<int>(levels.size());
    require(a.size() == k, ErrorCode::DimensionMismatch, "nested update: a must have k entries");
    check_target(target, k);
    const int t = target;
    CVec b = CVec::Zero(k);

    const double Jt = levels[t - 1];
    const cplx head = (Jt - 1.0) * checked_inv(Jt - 1.0 + Jt * tail_sum(a, t),
                                                "nested_b: J_t - 1 + J_t q_t");
    b[t - 1] = -head;
    if (t == k) return b;

    const double Jn = levels[t];
    const cplx next = (Jn - 1.0) * checked_inv(Jn - 1.0 - tail_sum(a, t + 1),
                                                "nested_b: J_{t+1} - 1 - q_{t+1}");
    double prod = 1.0;
    for (int r = t + 1; r <= k; ++r) {
        prod *= levels[r - 1];
        b[r - 1] = -(head - next) / prod;
    }
    return b;
}

CVec crossed_b(const CVec& a, const CrossedTwoWay& d, int target) {
    require(a.size() == 5, ErrorCode::DimensionMismatch, "crossed update needs k = 5");
    check_target(target, 5);
    const double I = d.I, J = d.J, K = d.K, L = d.L;
    // index 1..5; slot 0 unused
    const double sizes[6] = {1.0, I, I * J, I * K, I * J * K, I * J * K * L};
    const double dims[6] = {1.0, I - 1.0, I * (J - 1.0), I * (K - 1.0),
                            I * (J - 1.0) * (K - 1.0), I * J * K * (L - 1.0)};
    const cplx q[6] = {0.0,
                       a[0] + a[1] + a[2] + a[3] + a[4],
                       a[1] + a[3] + a[4],
                       a[2] + a[3] + a[4],
                       a[3] + a[4],
                       a[4]};

    CVec b = CVec::Zero(5);
    if (target == 1) {
        const cplx g1 = (I - 1.0) * checked_inv(I - 1.0 + I * q[1], "crossed_b: gamma_1");
        const cplx g2 = (J - 1.0) * checked_inv(J - 1.0 - q[2], "crossed_b: gamma_2");
        const cplx g3 = (K - 1.0) * checked_inv(K - 1.0 - q[3], "crossed_b: gamma_3");
        const double jk = (J - 1.0) * (K - 1.0);
        const cplx g4 = jk * checked_inv(jk + q[4], "crossed_b: gamma_4");
        b[0] = -g1;
        b[1] = -(g1 - g2) / J;
        b[2] = -(g1 - g3) / K;
        b[3] = -(g1 - g2 - g3 + g4) / (J * K);
        b[4] = b[3] / L;
        return b;
    }

    const int t = target;
    const cplx head = checked_inv(1.0 + (sizes[t] / dims[t]) * q[t], "crossed_b: 1 + (I_t/d_t) q_t");
    b[t - 1] = -head;
    if (t == 5) return b;

    const int succ = (t == 4) ? 5 : 4;
    const cplx tail = checked_inv(1.0 - (sizes[t] / dims[succ]) * q[succ],
                                  "crossed_b: 1 - (I_t/d_succ) q_succ");
    // components strictly above t: {4, 5} for t = 2, 3 and {5} for t = 4
    for (int r = succ; r <= 5; ++r) b[r - 1] = -(sizes[t] / sizes[r]) * (head - tail);
    return b;
}

CVec balanced_general_b(const CVec& a, const BalancedLattice& lat, int target) {
    const int k = lat.k;
    require(a.size() == k, ErrorCode::DimensionMismatch, "lattice update: a must have k entries");
    check_target(target, k);
    const int t = target;

    std::vector<cplx> q(k + 1, 0.0);
    for (int u = 0; u <= k; ++u)
        for (int r = 1; r <= k; ++r)
            if (lat.precedes(u, r)) q[u] += a[r - 1];

    std::vector<cplx> term(k + 1, 0.0);
    for (int u = 0; u <= k; ++u) {
        const int mu = lat.mobius(t, u);
        if (mu == 0) continue;
        const double ratio = static_cast<double>(lat.sizes[t]) / lat.dims[u];
        term[u] = static_cast<double>(mu) *
                  checked_inv(1.0 + ratio * mu * q[u], "balanced_general_b: 1 + (I_t/d_u) mu q_u");
    }

    CVec b = CVec::Zero(k);
    for (int r = 1; r <= k; ++r) {
        cplx s = 0.0;
        for (int u = 0; u <= k; ++u)
            if (lat.precedes(u, r)) s += term[u];
        b[r - 1] = -(static_cast<double>(lat.sizes[t]) / lat.sizes[r]) * s;
    }
    return b;
}

cplx mp_stieltjes(cplx z, double gamma) {
    require(gamma > 0.0, ErrorCode::InvalidArgument, "aspect ratio must be positive");
    require(z.imag() > 0.0, ErrorCode::InvalidArgument, "mp_stieltjes needs Im z > 0");
    const cplx A = gamma * z;
    const cplx B = z + gamma - 1.0;
    const cplx sq = std::sqrt(B * B - 4.0 * A);
    // stable pair of roots: q / A and 1 / q
    const cplx q = -0.5 * (B + (std::real(std::conj(B) * sq) >= 0.0 ? sq : -sq));
    const cplx r1 = q / A;
    const cplx r2 = 1.0 / q;
    return r1.imag() >= r2.imag() ? r1 : r2;
}

double mp_density(double x, double gamma) {
    const double lo = std::pow(1.0 - std::sqrt(gamma), 2);
    const double hi = std::pow(1.0 + std::sqrt(gamma), 2);
    if (x <= lo || x >= hi) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * gamma * x);
}

CVec ClosedFormUpdate::operator()(const CVec& a) const {
    switch (kind) {
        case ClosedFormKind::OneWay: return oneway_b(a, group_sizes, target);
        case ClosedFormKind::Nested: return nested_b(a, levels, target);
        case ClosedFormKind::Crossed: return crossed_b(a, crossed, target);
        case ClosedFormKind::Lattice: return balanced_general_b(a, *lattice, target);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown closed form");
}

ClosedFormUpdate lattice_update(const BalancedLattice& lat, int target) {
    check_target(target, lat.k);
    ClosedFormUpdate cf;
    cf.kind = ClosedFormKind::Lattice;
    cf.target = target;
    cf.k = lat.k;
    cf.lattice = lat;
    for (int r = 1; r <= lat.k; ++r)
        if (lat.precedes(target, r)) cf.active.push_back(r);

    // F = O diag(n beta_tr J_{s(r)} (x) Id_{d_r}) O^T has eigenvalues n beta_tr s(r).
    for (int u = 0; u <= lat.k; ++u) {
        const int mu = lat.mobius(target, u);
        if (mu == 0) continue;
        int s = 0;
        for (int r = 1; r <= lat.k; ++r)
            if (lat.precedes(u, r)) ++s;
        const double beta = mu / (lat.coefs[target] * lat.dims[u]);
        cf.f_norm = std::max(cf.f_norm, std::abs(lat.n * beta * s));
    }
    return cf;
}

std::optional<ClosedFormUpdate> recognize(const Design& design, int target) {
    if (design.oneway) {
        check_target(target, 2);
        const auto& ow = *design.oneway;
        ClosedFormUpdate cf;
        cf.kind = ClosedFormKind::OneWay;
        cf.target = target;
        cf.k = 2;
        cf.group_sizes = ow.group_sizes;
        const double n = ow.n, I = ow.I;
        if (target == 1) {
            cf.active = {1, 2};
            cf.f_norm = n / (ow.K * (n - I));
            for (int J : ow.group_sizes) cf.f_norm = std::max(cf.f_norm, (J + n / I) / ow.K);
        } else {
            cf.active = {2};
            cf.f_norm = n / (n - I);
        }
        return cf;
    }
    if (!design.balanced) return std::nullopt;

    ClosedFormUpdate cf = lattice_update(design.balanced->lattice, target);
    if (const auto* ne = std::get_if<NestedBalanced>(&design.spec)) {
        cf.kind = ClosedFormKind::Nested;
        cf.levels = ne->levels;
    } else if (const auto* cr = std::get_if<CrossedTwoWay>(&design.spec)) {
        cf.kind = ClosedFormKind::Crossed;
        cf.crossed = *cr;
    }
    return cf;
}

}  // namespace varspec
