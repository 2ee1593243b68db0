#include "laxforge/coords.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace laxforge {

namespace {

int inf_count(const PoleProfile& profile) { return std::max(profile.r_inf - 3, 0); }

cvec join(const cvec& a, const cvec& b) {
    cvec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

int chart_size(const PoleProfile& profile) {
    int m = inf_count(profile);
    for (const auto& p : profile.poles) m += p.r;
    return m;
}

cvec flatten_Q(const cvec& q_inf, const std::vector<cvec>& q_fin) {
    cvec out = q_inf;
    for (const auto& v : q_fin) out.insert(out.end(), v.begin(), v.end());
    return out;
}

void unflatten_Q(const cvec& flat, const PoleProfile& profile, cvec& q_inf, std::vector<cvec>& q_fin) {
    if (static_cast<int>(flat.size()) != chart_size(profile)) throw MalformedInput("chart vector has the wrong size");
    int at = inf_count(profile);
    q_inf.assign(flat.begin(), flat.begin() + at);
    q_fin.clear();
    for (const auto& p : profile.poles) {
        q_fin.emplace_back(flat.begin() + at, flat.begin() + at + p.r);
        at += p.r;
    }
}

cvec flatten(const GeoCoords& geo) { return join(flatten_Q(geo.Q_inf, geo.Q_fin), flatten_Q(geo.P_inf, geo.P_fin)); }
cvec flatten(const LaxCoords& lax) { return join(flatten_Q(lax.Q_inf, lax.Q_fin), flatten_Q(lax.R_inf, lax.R_fin)); }
cvec flatten(const OperCoords& oper) { return join(oper.q, oper.p); }

GeoCoords unflatten_geo(const cvec& flat, const PoleProfile& profile) {
    const int m = chart_size(profile);
    if (static_cast<int>(flat.size()) != 2 * m) throw MalformedInput("(Q,P) vector has the wrong size");
    GeoCoords geo;
    unflatten_Q(cvec(flat.begin(), flat.begin() + m), profile, geo.Q_inf, geo.Q_fin);
    unflatten_Q(cvec(flat.begin() + m, flat.end()), profile, geo.P_inf, geo.P_fin);
    return geo;
}

LaxCoords unflatten_lax(const cvec& flat, const PoleProfile& profile) {
    const int m = chart_size(profile);
    if (static_cast<int>(flat.size()) != 2 * m) throw MalformedInput("(Q,R) vector has the wrong size");
    LaxCoords lax;
    unflatten_Q(cvec(flat.begin(), flat.begin() + m), profile, lax.Q_inf, lax.Q_fin);
    unflatten_Q(cvec(flat.begin() + m, flat.end()), profile, lax.R_inf, lax.R_fin);
    return lax;
}

OperCoords unflatten_oper(const cvec& flat) {
    const size_t g = flat.size() / 2;
    return {cvec(flat.begin(), flat.begin() + g), cvec(flat.begin() + g, flat.end())};
}

RationalFunction build_L12(const cvec& q_inf, const std::vector<cvec>& q_fin, cx omega, const PoleProfile& profile) {
    RationalFunction f;
    for (size_t k = 0; k < q_inf.size(); ++k) f.add_poly_term(static_cast<int>(k), q_inf[k]);
    if (profile.r_inf >= 3) f.add_poly_term(profile.r_inf - 3, omega);
    for (int s = 0; s < profile.n(); ++s)
        for (int k = 1; k <= profile.poles[s].r; ++k) f.add_pole_term(profile.poles[s].x, k, q_fin[s][k - 1]);
    return f;
}

cmat jacobian_dQ_dq(const OperCoords& oper, const GeoCoords& geo, cx omega, const PoleProfile& profile) {
    const int g = static_cast<int>(oper.q.size());
    const int ninf = inf_count(profile);
    const int top = profile.r_inf - 4;
    cmat J = cmat::Zero(g, chart_size(profile));
    for (int i = 0; i < g; ++i) {
        const cx q = oper.q[i];
        for (int m = 0; m < ninf; ++m) {
            cx v = -omega * std::pow(q, top - m);
            for (int j = m + 1; j <= top; ++j) v -= geo.Q_inf[j] * std::pow(q, j - 1 - m);
            J(i, m) = v;
        }
        int col = ninf;
        for (int s = 0; s < profile.n(); ++s) {
            const int r = profile.poles[s].r;
            const cx d = q - profile.poles[s].x;
            for (int m = 1; m <= r; ++m, ++col) {
                cx v{};
                for (int j = m; j <= r; ++j) v += std::pow(d, m - j - 1) * geo.Q_fin[s][j - 1];
                J(i, col) = v;
            }
        }
    }
    return J;
}

GeoCoords qp_to_geo(const OperCoords& oper, cx omega, const PoleProfile& profile) {
    const int g = genus(profile);
    if (static_cast<int>(oper.q.size()) != g || static_cast<int>(oper.p.size()) != g)
        throw MalformedInput("(q,p) size does not match the genus");
    double scale = 1.0;
    for (cx q : oper.q) scale = std::max(scale, std::abs(q));
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(oper.q[i] - oper.q[j]) < 1e-10 * scale) throw DegenerateConfiguration("coincident q");

    std::vector<std::pair<cx, int>> den;
    for (const auto& p : profile.poles) den.push_back({p.x, p.r});
    auto f = RationalFunction::from_factored(Poly::from_roots(oper.q, omega), den);
    auto pf = partial_fractions(f, profile);

    GeoCoords geo;
    for (int k = 0; k < inf_count(profile); ++k) geo.Q_inf.push_back(pf.get(-1, k));
    for (int s = 0; s < profile.n(); ++s) {
        geo.Q_fin.emplace_back();
        for (int k = 1; k <= profile.poles[s].r; ++k) geo.Q_fin[s].push_back(pf.get(s, k));
    }

    // p = J P, completed by the P-linear constraints when r_inf <= 2.
    cmat J = jacobian_dQ_dq(oper, geo, omega, profile);
    const int m = chart_size(profile);
    cmat sys = cmat::Zero(m, m);
    cvec rhs(m, cx{});
    sys.topRows(g) = J;
    for (int i = 0; i < g; ++i) rhs[i] = oper.p[i];
    int row = g;
    if (profile.r_inf <= 2) {
        int col = inf_count(profile);
        for (int s = 0; s < profile.n(); ++s) {
            const int r = profile.poles[s].r;
            const cx X = profile.poles[s].x;
            for (int mm = 1; mm <= r; ++mm) {
                const cx Qm = geo.Q_fin[s][mm - 1];
                sys(row, col + mm - 1) += Qm;
                if (profile.r_inf == 1) {
                    sys(row + 1, col + mm - 1) += X * Qm;
                    if (mm < r) sys(row + 1, col + mm - 1) += geo.Q_fin[s][mm];
                }
            }
            col += r;
        }
        row += profile.r_inf == 2 ? 1 : 2;
    }
    if (row != m) throw UnsupportedProfile("chart size does not match genus plus constraints");
    auto sol = dense_solve(sys, rhs);
    if (sol.ill_conditioned) throw DegenerateConfiguration("singular (q,p) -> (Q,P) momentum system");
    cvec P_inf;
    unflatten_Q(sol.x, profile, geo.P_inf, geo.P_fin);
    return geo;
}

OperCoords geo_to_qp(const GeoCoords& geo, cx omega, const PoleProfile& profile) {
    const int g = genus(profile);
    Poly num = build_L12(geo.Q_inf, geo.Q_fin, omega, profile).num();
    double scale = 0.0;
    for (cx c : num.coeffs()) scale = std::max(scale, std::abs(c));
    for (int k = g + 1; k <= num.degree(); ++k)
        if (std::abs(num.coeff(k)) > 1e-8 * std::max(scale, 1.0))
            throw ChartError("Q violates the chart constraints (numerator degree exceeds g)");
    cvec c(g + 1);
    for (int k = 0; k <= g; ++k) c[k] = num.coeff(k);
    Poly trunc(c);
    if (trunc.degree() != g) throw DegenerateConfiguration("vanishing leading numerator coefficient");

    cmat C = cmat::Zero(g, g);
    for (int i = 1; i < g; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < g; ++i) C(i, g - 1) = -c[i] / c[g];
    Eigen::ComplexEigenSolver<cmat> es(C, false);
    Poly dtrunc = trunc.derivative();
    OperCoords out;
    for (int i = 0; i < g; ++i) {
        cx r = es.eigenvalues()(i);
        cx d = dtrunc(r);
        if (d != cx{}) r -= trunc(r) / d;
        out.q.push_back(r);
    }
    std::sort(out.q.begin(), out.q.end(), [](cx a, cx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    double qs = 1.0;
    for (cx q : out.q) qs = std::max(qs, std::abs(q));
    for (int i = 1; i < g; ++i)
        if (std::abs(out.q[i] - out.q[i - 1]) < 1e-8 * qs) throw DegenerateConfiguration("multiple root of L12");

    cmat J = jacobian_dQ_dq(out, geo, omega, profile);
    cvecE P = to_eigen(flatten_Q(geo.P_inf, geo.P_fin));
    out.p = to_std(J * P);
    return out;
}

cx g0_from_Q(const cvec& q_inf, const std::vector<cvec>& q_fin, const PoleProfile& profile, const TimeChart& chart,
             cx omega) {
    const int ri = profile.r_inf;
    if (ri >= 4) return chart.inf(ri - 2) - chart.inf(ri - 1) / omega * q_inf[ri - 4];
    cx s1{}, s2{};
    for (int s = 0; s < profile.n(); ++s) {
        s1 += q_fin[s][0];
        s2 += profile.poles[s].x * q_fin[s][0] + (profile.poles[s].r >= 2 ? q_fin[s][1] : cx{});
    }
    if (ri == 3) return chart.inf(1) - chart.inf(2) / omega * s1;
    if (ri == 2) return chart.inf(0) - chart.inf(1) / omega * s2;
    throw UnsupportedProfile("g0 depends on P when r_inf = 1");
}

LaxCoords geo_to_lax(const GeoCoords& geo, const PoleProfile& profile, const TimeChart& chart, cx omega, cx g0) {
    const cx t = chart.inf(profile.r_inf - 1);
    LaxCoords lax{geo.Q_inf, {}, geo.Q_fin, {}};
    cx sum_q1{};
    for (const auto& q : geo.Q_fin) sum_q1 += q[0];
    const int top = profile.r_inf - 4;
    auto Qi = [&](int k) { return k == -1 ? sum_q1 : geo.Q_inf[k]; };
    for (int k = 0; k <= top; ++k) {
        cx v = -omega * geo.P_inf[top - k];
        for (int m = 0; m <= top - 1 - k; ++m) v -= geo.P_inf[m] * geo.Q_inf[k + 1 + m];
        v -= t / omega * Qi(k - 1) + g0 / omega * geo.Q_inf[k];
        lax.R_inf.push_back(v);
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        const cx X = profile.poles[s].x;
        const auto& Q = geo.Q_fin[s];
        const auto& P = geo.P_fin[s];
        cvec R(r);
        for (int k = 1; k <= r; ++k) {
            cx v{};
            for (int m = 1; m <= r + 1 - k; ++m) v += P[m - 1] * Q[k + m - 2];
            v -= (g0 + t * X) / omega * Q[k - 1];
            if (k <= r - 1) v -= t / omega * Q[k];
            R[k - 1] = v;
        }
        lax.R_fin.push_back(R);
    }
    return lax;
}

GeoCoords lax_to_geo(const LaxCoords& lax, const PoleProfile& profile, const TimeChart& chart, cx omega, cx g0) {
    if (omega == cx{}) throw ChartError("omega = 0");
    const cx t = chart.inf(profile.r_inf - 1);
    GeoCoords geo{lax.Q_inf, {}, lax.Q_fin, {}};
    cx sum_q1{};
    for (const auto& q : lax.Q_fin) sum_q1 += q[0];
    const int top = profile.r_inf - 4;
    auto Qi = [&](int k) { return k == -1 ? sum_q1 : lax.Q_inf[k]; };
    geo.P_inf.assign(std::max(top + 1, 0), cx{});
    for (int k = top; k >= 0; --k) {
        cx target = -(lax.R_inf[k] + t / omega * Qi(k - 1) + g0 / omega * lax.Q_inf[k]);
        const int unknown = top - k;
        for (int m = 0; m < unknown; ++m) target -= geo.P_inf[m] * lax.Q_inf[k + 1 + m];
        geo.P_inf[unknown] = target / omega;
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        const cx X = profile.poles[s].x;
        const auto& Q = lax.Q_fin[s];
        const auto& R = lax.R_fin[s];
        if (Q[r - 1] == cx{}) throw ChartError("Q_{X" + std::to_string(s + 1) + ",r} = 0");
        cvec P(r, cx{});
        for (int k = r; k >= 1; --k) {
            cx target = R[k - 1] + (g0 + t * X) / omega * Q[k - 1];
            if (k <= r - 1) target += t / omega * Q[k];
            const int unknown = r + 1 - k;  // P_unknown multiplies Q_r
            for (int m = 1; m < unknown; ++m) target -= P[m - 1] * Q[k + m - 2];
            P[unknown - 1] = target / Q[r - 1];
        }
        geo.P_fin.push_back(P);
    }
    return geo;
}

cmat fd_jacobian(const VectorMap& f, const cvec& x0, double h) {
    const cvec f0 = f(x0);
    cmat J(static_cast<Eigen::Index>(f0.size()), static_cast<Eigen::Index>(x0.size()));
    for (size_t k = 0; k < x0.size(); ++k) {
        const double step = h * std::max(1.0, std::abs(x0[k]));
        auto at = [&](double m) {
            cvec x = x0;
            x[k] += m * step;
            return f(x);
        };
        cvec p1 = at(1), m1 = at(-1), p2 = at(2), m2 = at(-2);
        for (size_t i = 0; i < f0.size(); ++i)
            J(i, k) = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * step);
    }
    return J;
}

namespace {

cmat omega_form(Eigen::Index n) {
    cmat w = cmat::Zero(2 * n, 2 * n);
    w.topRightCorner(n, n) = cmat::Identity(n, n);
    w.bottomLeftCorner(n, n) = -cmat::Identity(n, n);
    return w;
}

}  // namespace

double symplectic_defect(const VectorMap& f, const cvec& x0, double h) {
    cmat J = fd_jacobian(f, x0, h);
    if (J.rows() % 2 || J.cols() % 2) throw MalformedInput("symplectic_defect needs even dimensions");
    cmat D = J.transpose() * omega_form(J.rows() / 2) * J - omega_form(J.cols() / 2);
    return D.cwiseAbs().maxCoeff();
}

}  // namespace laxforge
