#include "laxforge/opergauge.hpp"

#include <algorithm>

namespace laxforge {

namespace {

constexpr double kMaxStride = 1e-3;

void require_genus(const OperCoords& oper, const PoleProfile& profile) {
    const size_t g = static_cast<size_t>(genus(profile));
    if (oper.q.size() != g || oper.p.size() != g)
        throw MalformedInput("expected " + std::to_string(g) + " pairs (q, p)");
}

VandermondeStack node_stack(const cvec& q, const PoleProfile& profile) {
    VandermondeStack st;
    st.nodes = q;
    if (profile.r_inf >= 4) st.blocks.push_back({ExtendedPoint::inf(), profile.r_inf - 3});
    for (const auto& pole : profile.poles) st.blocks.push_back({ExtendedPoint::at(pole.x), pole.r});
    return st;
}

// Column of H_{inf,k} / H_{X_s,k} in the stacked unknown vector.
struct Layout {
    int inf_count = 0;
    std::vector<int> offset;

    explicit Layout(const PoleProfile& profile) {
        inf_count = std::max(profile.r_inf - 3, 0);
        int o = inf_count;
        for (const auto& pole : profile.poles) {
            offset.push_back(o);
            o += pole.r;
        }
    }
    int inf(int k) const { return k; }
    int fin(int s, int k) const { return offset[s] + k - 1; }
};

// -sum_{j=0}^k t_{r-1-j} t_{r-1-(k-j)}
cx convolution(const cvec& t, int k) {
    const int r = static_cast<int>(t.size());
    cx c{};
    for (int j = 0; j <= k; ++j) c -= t[r - 1 - j] * t[r - 1 - (k - j)];
    return c;
}

}  // namespace

RationalFunction build_tdP2(const TimeChart& chart, const PoleProfile& profile) {
    RationalFunction f;
    const int ri = profile.r_inf;
    for (int k = 0; k < ri; ++k) {
        const int j = 2 * ri - 4 - k;
        if (j < std::max(0, ri - 3)) continue;
        f.add_poly_term(j, convolution(chart.t_inf, k));
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        for (int k = 0; k < r; ++k) f.add_pole_term(profile.poles[s].x, 2 * r - k, convolution(chart.t_fin[s], k));
    }
    return f;
}

HSolution solve_H(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile) {
    require_genus(oper, profile);
    const int g = genus(profile);
    const int ri = profile.r_inf;
    const auto& q = oper.q;
    const auto& p = oper.p;

    VandermondeStack st = node_stack(q, profile);
    require_separated_nodes(st);
    const Layout lay(profile);
    const int extra = ri == 2 ? 1 : ri == 1 ? 2 : 0;
    const int unknowns = st.columns();

    cmat a = cmat::Zero(g + extra, unknowns);
    a.topRows(g) = st.dense();
    cvec rhs(g + extra);

    const RationalFunction tdp2 = build_tdP2(chart, profile);
    for (int i = 0; i < g; ++i) {
        cx v = p[i] * p[i] + tdp2(q[i]);
        for (const auto& pole : profile.poles) v += p[i] * static_cast<double>(pole.r) / (q[i] - pole.x);
        for (int j = 0; j < g; ++j)
            if (j != i) v += (p[j] - p[i]) / (q[i] - q[j]);
        if (ri >= 3) v += chart.inf(ri - 1) * std::pow(q[i], ri - 3);
        rhs[i] = v;
    }

    cx sum_p{}, sum_qp{}, sum_q{};
    for (int j = 0; j < g; ++j) {
        sum_p += p[j];
        sum_qp += q[j] * p[j];
        sum_q += q[j];
    }
    if (ri <= 2) {
        for (int s = 0; s < profile.n(); ++s) a(g, lay.fin(s, 1)) = 1.0;
        rhs[g] = sum_p;
        if (ri == 2) rhs[g] += 2.0 * chart.inf(1) * chart.inf(0) - chart.inf(1);
    }
    if (ri == 1) {
        cx v = sum_qp + chart.inf(0) * (chart.inf(0) - 1.0);
        for (int s = 0; s < profile.n(); ++s) {
            a(g + 1, lay.fin(s, 1)) = profile.poles[s].x;
            if (profile.poles[s].r >= 2) a(g + 1, lay.fin(s, 2)) = 1.0;
            if (profile.poles[s].r == 1) v -= chart.fin(s, 0) * chart.fin(s, 0);
        }
        rhs[g + 1] = v;
    }

    SolveResult sol = dense_solve(a, rhs);
    HSolution out;
    out.cond = sol.cond;
    for (int k = 0; k < lay.inf_count; ++k) out.H[{-1, k}] = sol.x[lay.inf(k)];
    for (int s = 0; s < profile.n(); ++s)
        for (int k = 1; k <= profile.poles[s].r; ++k) out.H[{s, k}] = sol.x[lay.fin(s, k)];

    cx moment{};
    for (const auto& pole : profile.poles) moment += static_cast<double>(pole.r) * pole.x;
    if (ri >= 2) {
        out.g0 = chart.inf(ri - 2) + chart.inf(ri - 1) * (sum_q - moment);
    } else {
        const cx t0 = chart.inf(0);
        if (t0 == cx{}) throw DegenerateConfiguration("g0 needs t_inf,0 != 0 when r_inf = 1");
        cx v = t0 * (2.0 * t0 - 1.0) * (sum_q - moment);
        for (int s = 0; s < profile.n(); ++s) {
            const cx x = profile.poles[s].x;
            const int r = profile.poles[s].r;
            const cvec& t = chart.t_fin[s];
            if (r == 1) v -= 2.0 * x * convolution(t, 0);
            if (r == 2) v -= convolution(t, 1);
            v += x * x * out.H[{s, 1}];
            if (r >= 2) v += 2.0 * x * out.H[{s, 2}];
            if (r >= 3) v += out.H[{s, 3}];
        }
        for (int j = 0; j < g; ++j) v -= p[j] * q[j] * q[j];
        out.g0 = v / (2.0 * t0);
    }
    return out;
}

Mat2 OperLax::at(cx lambda) const {
    Mat2 m;
    m << 0.0, 1.0, L21(lambda), L22(lambda);
    return m;
}

OperLax build_oper_L(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile, cx h_fault) {
    HSolution hs = solve_H(oper, chart, profile);
    for (auto& [key, v] : hs.H) v *= 1.0 + h_fault;
    OperLax out;
    out.H = hs.H;
    out.g0 = hs.g0;
    out.tdP2 = build_tdP2(chart, profile);

    const int ri = profile.r_inf;
    RationalFunction l21 = -out.tdP2;
    for (int k = 0; k <= ri - 4; ++k) l21.add_poly_term(k, coeff_at(hs.H, -1, k));
    for (int s = 0; s < profile.n(); ++s)
        for (int k = 1; k <= profile.poles[s].r; ++k) l21.add_pole_term(profile.poles[s].x, k, coeff_at(hs.H, s, k));
    for (size_t j = 0; j < oper.q.size(); ++j) l21.add_pole_term(oper.q[j], 1, -oper.p[j]);
    if (ri >= 3) l21.add_poly_term(ri - 3, -chart.inf(ri - 1));
    out.L21 = std::move(l21);

    RationalFunction l22;
    for (cx qj : oper.q) l22.add_pole_term(qj, 1, 1.0);
    for (const auto& pole : profile.poles) l22.add_pole_term(pole.x, 1, -static_cast<double>(pole.r));
    out.L22 = std::move(l22);
    return out;
}

CoeffMap nu_coeffs(const DeformationVector& alpha, const TimeChart& chart, const PoleProfile& profile) {
    require_unfrozen(alpha, chart);
    CoeffMap nu;
    const int ri = profile.r_inf;
    if (ri >= 4) {
        const int m = ri - 3;
        cvec b(m);
        for (int i = 0; i < m; ++i) b[i] = alpha.inf(m - i) / static_cast<double>(m - i);
        cvec x = toeplitz_solve(toeplitz_from_times(chart, profile, -1), b);
        for (int k = 1; k <= m; ++k) nu[{-1, k}] = x[k - 1];
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        nu[{s, 0}] = -alpha.pos(s);
        if (r < 2) continue;
        cvec b(r - 1);
        for (int i = 0; i < r - 1; ++i) b[i] = -alpha.fin(s, r - 1 - i) / static_cast<double>(r - 1 - i);
        cvec x = toeplitz_solve(toeplitz_from_times(chart, profile, s), b);
        for (int k = 1; k < r; ++k) nu[{s, k}] = x[k - 1];
    }
    return nu;
}

Mat2 OperDeformation::at(cx lambda) const {
    Mat2 m;
    m << A11(lambda), A12(lambda), A21(lambda), A22(lambda);
    return m;
}

OperDeformation build_oper_A(const DeformationVector& alpha, const OperCoords& oper, const OperLax& lax,
                             const TimeChart& chart, const PoleProfile& profile, cx dlog_omega, cx nu_fault) {
    require_genus(oper, profile);
    const int g = genus(profile);
    const int ri = profile.r_inf;
    OperDeformation out;
    out.nu = nu_coeffs(alpha, chart, profile);
    for (auto& [key, v] : out.nu) v *= 1.0 + nu_fault;

    // Unknowns (mu_1..mu_g, nu_{inf,0}, nu_{inf,-1}); the last two only when r_inf <= 2.
    VandermondeStack st = node_stack(oper.q, profile);
    require_separated_nodes(st);
    const Layout lay(profile);
    const int n_unk = st.columns();
    cmat m = cmat::Zero(n_unk, n_unk);
    m.leftCols(g) = st.dense().transpose();
    cvec rhs(n_unk);
    for (int k = 1; k <= lay.inf_count; ++k) rhs[lay.inf(k - 1)] = coeff_at(out.nu, -1, k);
    for (int s = 0; s < profile.n(); ++s) {
        for (int k = 1; k <= profile.poles[s].r; ++k) {
            const int row = lay.fin(s, k);
            rhs[row] = -coeff_at(out.nu, s, k - 1);
            if (k == 1 && ri <= 2) m(row, g) = -1.0;
            if (k == 1 && ri == 1) m(row, g + 1) = -profile.poles[s].x;
            if (k == 2 && ri == 1) m(row, g + 1) = -1.0;
        }
    }
    SolveResult sol = dense_solve(m, rhs);
    out.mu.assign(sol.x.begin(), sol.x.begin() + g);
    cx nu0{}, nu_m1{};
    if (ri <= 2) nu0 = out.nu[{-1, 0}] = sol.x[g];
    if (ri == 1) nu_m1 = out.nu[{-1, -1}] = sol.x[g + 1];

    out.c_inf0 = 0.5 * dlog_omega + 0.5 * nu_m1;
    RationalFunction a11 = RationalFunction::constant(out.c_inf0);
    RationalFunction a12;
    a12.add_poly_term(1, nu_m1);
    a12.add_poly_term(0, nu0);
    for (int j = 0; j < g; ++j) {
        a11.add_pole_term(oper.q[j], 1, -oper.p[j] * out.mu[j]);
        a12.add_pole_term(oper.q[j], 1, out.mu[j]);
    }
    out.A21 = a11.derivative() + a12 * lax.L21;
    out.A22 = a12.derivative() + a11 + a12 * lax.L22;
    out.A11 = std::move(a11);
    out.A12 = std::move(a12);
    return out;
}

std::map<TimeKey, cx> hamiltonians_oper(const CoeffMap& H, const TimeChart& chart, const PoleProfile& profile) {
    std::map<TimeKey, cx> out;
    const int ri = profile.r_inf;
    if (ri >= 4) {
        const int m = ri - 3;
        cvec b(m);
        for (int i = 0; i < m; ++i) b[i] = coeff_at(H, -1, ri - 4 - i);
        cvec x = toeplitz_solve(toeplitz_from_times(chart, profile, -1), b);
        for (int k = 1; k <= m; ++k) out[{-1, k}] = x[k - 1] / static_cast<double>(k);
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        out[{s, -1}] = coeff_at(H, s, 1);
        if (r < 2) continue;
        cvec b(r - 1);
        for (int i = 0; i < r - 1; ++i) b[i] = coeff_at(H, s, r - i);
        cvec x = toeplitz_solve(toeplitz_from_times(chart, profile, s), b);
        for (int k = 1; k < r; ++k) out[{s, k}] = x[k - 1] / static_cast<double>(k);
    }
    return out;
}

cx hamiltonian_along(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                     const PoleProfile& profile) {
    auto hams = hamiltonians_oper(solve_H(oper, chart, profile).H, chart, profile);
    cx total{};
    for (const auto& [key, a] : alpha.alpha) {
        if (a == cx{}) continue;
        auto it = hams.find(key);
        if (it == hams.end()) throw ChartError("no Hamiltonian for " + to_string(key));
        total += a * it->second;
    }
    return total;
}

OperCoords hamilton_velocity(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                             const PoleProfile& profile, double h) {
    const size_t g = oper.q.size();
    VectorMap ham = [&](const cvec& x) { return cvec{hamiltonian_along(alpha, unflatten_oper(x), chart, profile)}; };
    cmat J = fd_jacobian(ham, flatten(oper), h);
    OperCoords v;
    for (size_t i = 0; i < g; ++i) {
        v.q.push_back(J(0, g + i));
        v.p.push_back(-J(0, i));
    }
    return v;
}

double compatibility_residual(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                              const PoleProfile& profile, const CompatOptions& opt) {
    require_unfrozen(alpha, chart);
    const OperLax lax = build_oper_L(oper, chart, profile, opt.h_fault);
    const OperDeformation A = build_oper_A(alpha, oper, lax, chart, profile, 0.0, opt.nu_fault);
    const OperCoords vel = hamilton_velocity(alpha, oper, chart, profile);

    // Fast (q, p) motion near close pairs needs a shorter stride along the flow.
    double speed = 1.0;
    for (size_t i = 0; i < vel.q.size(); ++i) speed = std::max({speed, std::abs(vel.q[i]), std::abs(vel.p[i])});
    for (const auto& [key, a] : alpha.alpha) speed = std::max(speed, std::abs(a));
    const double h = std::min(opt.h, kMaxStride / speed);

    auto moved = [&](double e) {
        PoleProfile prof = profile;
        TimeChart ch = chart;
        shift_along(prof, ch, alpha, e);
        OperCoords o = oper;
        for (size_t i = 0; i < o.q.size(); ++i) {
            o.q[i] += e * vel.q[i];
            o.p[i] += e * vel.p[i];
        }
        return build_oper_L(o, ch, prof, opt.h_fault);
    };
    const OperLax p1 = moved(h), m1 = moved(-h), p2 = moved(2 * h), m2 = moved(-2 * h);
    const RationalFunction d11 = A.A11.derivative(), d12 = A.A12.derivative(), d21 = A.A21.derivative(),
                           d22 = A.A22.derivative();

    cvec poles = oper.q;
    for (const auto& pole : profile.poles) poles.push_back(pole.x);
    double worst = 0;
    for (cx z : sample_points(poles, opt.samples, opt.seed)) {
        Mat2 dL = (8.0 * (p1.at(z) - m1.at(z)) - (p2.at(z) - m2.at(z))) / (12.0 * h);
        Mat2 dA;
        dA << d11(z), d12(z), d21(z), d22(z);
        Mat2 L = lax.at(z), Az = A.at(z);
        Mat2 LA = L * Az, AL = Az * L;
        Mat2 res = dL - dA + (LA - AL);
        double scale = 1.0 + std::max({dL.cwiseAbs().maxCoeff(), dA.cwiseAbs().maxCoeff(), LA.cwiseAbs().maxCoeff(),
                                       AL.cwiseAbs().maxCoeff()});
        worst = std::max(worst, res.cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

}  // namespace laxforge
