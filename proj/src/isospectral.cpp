#include "laxforge/isospectral.hpp"

#include "laxforge/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace laxforge {

namespace {
constexpr double kCauchyRadius = 1e-2;
}  // namespace

Rational::Rational(long long n, long long d) {
    if (d == 0) throw MalformedInput("Rational: zero denominator");
    if (d < 0) n = -n, d = -d;
    const long long g = std::gcd(n < 0 ? -n : n, d);
    num = n / (g == 0 ? 1 : g);
    den = d / (g == 0 ? 1 : g);
}

Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
Rational operator/(Rational a, Rational b) {
    if (b.num == 0) throw SingularMatrix("Rational: division by zero");
    return {a.num * b.den, a.den * b.num};
}

MonoSum MonoSum::constant(int vars, Rational c) {
    MonoSum m(vars);
    m.add(Exponents(vars), c);
    return m;
}

MonoSum MonoSum::power(int vars, int var, Rational e) {
    MonoSum m(vars);
    Exponents ex(vars);
    ex[var] = e;
    m.add(ex, 1);
    return m;
}

void MonoSum::add(const Exponents& e, Rational c) {
    if (c.num == 0) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
        it->second = it->second + c;
        if (it->second.num == 0) terms_.erase(it);
    }
}

MonoSum MonoSum::derivative(int var) const {
    MonoSum out(vars_);
    for (const auto& [e, c] : terms_) {
        if (e[var].num == 0) continue;
        Exponents d = e;
        d[var] = d[var] - 1;
        out.add(d, c * e[var]);
    }
    return out;
}

MonoSum MonoSum::times_var(int var) const {
    MonoSum out(vars_);
    for (const auto& [e, c] : terms_) {
        Exponents d = e;
        d[var] = d[var] + 1;
        out.add(d, c);
    }
    return out;
}

MonoSum MonoSum::scaled(Rational s) const {
    MonoSum out(vars_);
    for (const auto& [e, c] : terms_) out.add(e, c * s);
    return out;
}

MonoSum& MonoSum::operator+=(const MonoSum& o) {
    if (vars_ == 0) vars_ = o.vars_;
    for (const auto& [e, c] : o.terms_) add(e, c);
    return *this;
}

MonoSum& MonoSum::operator-=(const MonoSum& o) {
    if (vars_ == 0) vars_ = o.vars_;
    for (const auto& [e, c] : o.terms_) add(e, Rational{} - c);
    return *this;
}

cx MonoSum::operator()(const cvec& z) const {
    cx total{};
    for (const auto& [e, c] : terms_) {
        cx term = c.value();
        for (int i = 0; i < vars_; ++i) {
            if (e[i].num == 0) continue;
            if (e[i].is_integer()) {
                const long long n = e[i].num;
                cx p = 1.0;
                for (long long k = 0; k < (n < 0 ? -n : n); ++k) p *= z[i];
                term *= n < 0 ? 1.0 / p : p;
            } else {
                term *= std::pow(z[i], e[i].value());
            }
        }
        total += term;
    }
    return total;
}

std::string MonoSum::str(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c.num;
        if (c.den != 1) os << "/" << c.den;
        for (int i = 0; i < vars_; ++i) {
            if (e[i].num == 0) continue;
            os << "*" << names[i];
            if (!(e[i].num == 1 && e[i].den == 1)) {
                os << "^" << e[i].num;
                if (e[i].den != 1) os << "/" << e[i].den;
            }
        }
    }
    return os.str();
}

cvec ProfileMatrix::var_values(const TimeChart& chart) const {
    cvec z;
    for (const auto& key : vars) z.push_back(key.pole < 0 ? chart.inf(key.k) : chart.fin(key.pole, key.k));
    return z;
}

cmat ProfileMatrix::evaluate(const TimeChart& chart) const {
    const cvec z = var_values(chart);
    const int n = size();
    cmat m = cmat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = F[i][j](z);
    return m;
}

cvec ProfileMatrix::evaluate_shift(const TimeChart& chart) const {
    const cvec z = var_values(chart);
    cvec out;
    for (const auto& s : shift) out.push_back(s(z));
    return out;
}

namespace {

std::vector<std::vector<MonoSum>> empty_rows(int n, int vars) {
    std::vector<std::vector<MonoSum>> F(n);
    for (int i = 0; i < n; ++i) F[i].assign(i + 1, MonoSum(vars));
    return F;
}

// Polynomial with the given gradient (terms of positive total degree; zero constant).
MonoSum euler_integrate(const std::vector<MonoSum>& grad, int vars) {
    MonoSum sum(vars);
    for (int c = 0; c < static_cast<int>(grad.size()); ++c) sum += grad[c].times_var(c);
    MonoSum out(vars);
    for (const auto& [e, coef] : sum.terms()) {
        Rational deg;
        for (const auto& x : e) deg = deg + x;
        out.add(e, coef / deg);
    }
    return out;
}

void check_branch(cx t, int r) {
    if (t == cx{}) throw DegenerateConfiguration("singular profile: leading time vanishes");
    if (r >= 3 && t.real() < 0 && std::abs(t.imag()) <= 1e-12 * std::abs(t))
        throw ChartError("leading time on the branch cut of the fractional powers");
}

void require_normalized_infinity(const PoleProfile& profile, const TimeChart& chart) {
    const int r = profile.r_inf;
    if (r < 4) throw UnsupportedProfile("infinity profile needs r_inf >= 4");
    if (chart.inf(r - 1) != cx(1.0) || chart.inf(r - 2) != cx{})
        throw NormalizationConflict("infinity profile needs t_{inf,r-1} = 1 and t_{inf,r-2} = 0");
}

}  // namespace

ProfileMatrix solve_profile_finite(const PoleProfile& profile, int s, const TimeChart& chart) {
    const int r = profile.poles.at(s).r;
    if (r < 2) throw UnsupportedProfile("finite profile needs r_s >= 2");
    check_branch(chart.fin(s, r - 1), r);

    ProfileMatrix pm;
    pm.kind = ProfileMatrix::Kind::finite;
    pm.pole = ExtendedPoint::at(profile.poles[s].x);
    pm.pole_index = s;
    pm.r = r;
    const int n = r - 1;  // variables tau_c = t_{X,r-c}, c = 1..r-1, stored at index c-1
    for (int c = 1; c <= n; ++c) pm.vars.push_back({s, r - c});
    pm.F = empty_rows(n, n);

    auto d = [&](int a) { return Rational(1, r - a); };
    for (int j = 1; j <= n; ++j) {
        pm.F[j - 1][j - 1] = MonoSum::power(n, 0, Rational(r - j, r - 1));
        for (int a = j + 1; a <= n; ++a) {
            // Column-1 equation: tau_1 d_a dF_a/dtau_1 - d_1 F_a = -sum_{b<a} tau_{a-b+1} d_b dF_b/dtau_1.
            MonoSum S(n);
            for (int b = j; b < a; ++b) S -= pm.F[b - 1][j - 1].derivative(0).times_var(a - b).scaled(d(b));
            MonoSum Fa(n);
            for (const auto& [e, coef] : S.terms()) {
                const Rational denom = d(a) * e[0] - d(1);
                if (denom.num == 0) throw SingularMatrix("resonant exponent in the finite profile recursion");
                Fa.add(e, coef / denom);
            }
            pm.F[a - 1][j - 1] = Fa;
        }
    }
    return pm;
}

ProfileMatrix solve_profile_infinity(const PoleProfile& profile, const TimeChart& chart) {
    require_normalized_infinity(profile, chart);
    const int r = profile.r_inf;
    ProfileMatrix pm;
    pm.kind = ProfileMatrix::Kind::infinity_Q;
    pm.pole = ExtendedPoint::inf();
    pm.r = r;
    const int nv = r - 4;  // x_c = t_{inf,r-2-c}, c = 1..r-4
    for (int c = 1; c <= nv; ++c) pm.vars.push_back({-1, r - 2 - c});
    const int n = r - 2;  // rows V_1 = omega, V_{i} = Q_{inf,r-2-i}
    pm.F = empty_rows(n, nv);

    // mu_1 = 1, mu_2 = 0, mu_i = x_{i-2}
    auto mu_times = [&](int i, const MonoSum& m) { return i == 1 ? m : i == 2 ? MonoSum(nv) : m.times_var(i - 3); };
    for (int j = 1; j <= n; ++j) {
        std::vector<MonoSum> V(n + 1, MonoSum(nv));  // 1-based
        V[j] = MonoSum::constant(nv, 1);
        for (int a = 1; a <= r - 4; ++a) {
            if (a + 2 <= j) continue;
            std::vector<MonoSum> grad(nv, MonoSum(nv));
            for (int c = 1; c <= nv; ++c) {
                MonoSum g(nv);
                if (a - c + 1 >= 1) g += V[a - c + 1].scaled(Rational(1, r - 2 - c));
                for (int b = 1; b < a; ++b)
                    g -= mu_times(a - b + 1, V[b + 2].derivative(c - 1)).scaled(Rational(1, r - 3 - b));
                grad[c - 1] = g.scaled(Rational(r - 3 - a));
            }
            V[a + 2] = euler_integrate(grad, nv);
        }
        for (int i = j; i <= n; ++i) pm.F[i - 1][j - 1] = V[i];
    }
    return pm;
}

RProfiles solve_R_profiles(const PoleProfile& profile, const TimeChart& chart) {
    RProfiles out;
    for (int s = 0; s < profile.n(); ++s) {
        if (profile.poles[s].r < 2) continue;
        out.finite.push_back(solve_profile_finite(profile, s, chart));
        out.finite_pole.push_back(s);
    }
    const int r = profile.r_inf;
    if (r < 4) return out;
    require_normalized_infinity(profile, chart);
    out.has_infinity = true;
    ProfileMatrix& pm = out.infinity;
    pm.kind = ProfileMatrix::Kind::infinity_R;
    pm.pole = ExtendedPoint::inf();
    pm.r = r;
    const int n = r - 3;  // rows Y_a = R_{inf,r-3-a}; variables x_c = t_{inf,r-2-c}, c = 1..r-3
    for (int c = 1; c <= n; ++c) pm.vars.push_back({-1, r - 2 - c});
    pm.F = empty_rows(n, n);
    for (int a = 1; a <= n; ++a) pm.shift.push_back(MonoSum::power(n, a - 1, 1).scaled(-1));

    auto mu_times = [&](int i, const MonoSum& m) { return i == 1 ? m : i == 2 ? MonoSum(n) : m.times_var(i - 3); };
    for (int j = 1; j <= n; ++j) {
        std::vector<MonoSum> Y(n + 1, MonoSum(n));
        Y[j] = MonoSum::constant(n, 1);
        for (int a = j + 1; a <= n; ++a) {
            std::vector<MonoSum> grad(n, MonoSum(n));
            for (int c = 1; c <= n; ++c) {
                MonoSum g(n);
                if (a - c + 1 >= 3) g += Y[a - c - 1].scaled(Rational(1, r - 2 - c));
                for (int b = 1; b < a; ++b)
                    g -= mu_times(a - b + 1, Y[b].derivative(c - 1)).scaled(Rational(1, r - 2 - b));
                grad[c - 1] = g.scaled(Rational(r - 2 - a));
            }
            Y[a] = euler_integrate(grad, n);
        }
        for (int i = j; i <= n; ++i) pm.F[i - 1][j - 1] = Y[i];
    }
    return out;
}

ProfileMatrix perturb_profile(const ProfileMatrix& pm, Rational eps) {
    ProfileMatrix out = pm;
    if (pm.vars.empty()) return out;
    const MonoSum bump = MonoSum::power(static_cast<int>(pm.vars.size()), 0, 2).scaled(eps);
    for (auto& row : out.F)
        for (auto& e : row) e += bump;
    return out;
}

cx omega_profile(const IsoCoords& iso, const TimeChart& chart, const PoleProfile& profile, double tol) {
    if (profile.r_inf >= 2) return iso.omega;
    cx sum_u1{}, omega{};
    double scale = 1.0;
    for (int s = 0; s < profile.n(); ++s) {
        const auto& u = iso.u_fin.at(s);
        sum_u1 += u[0];
        scale = std::max(scale, std::abs(u[0]));
        omega += profile.poles[s].x * u[0];
        const int r = profile.poles[s].r;
        if (r < 2) continue;
        // last row of F u is Q_{X,2}
        const cmat F = solve_profile_finite(profile, s, chart).evaluate(chart);
        for (int j = 0; j < r - 1; ++j) omega += F(r - 2, j) * u[r - 1 - j];
    }
    if (std::abs(sum_u1) > tol * scale) throw ChartError("r_inf = 1 needs sum u_{X,1} = 0");
    return omega;
}

namespace {

// (x_r, ..., x_2) from the chart layout x[k-1] = x_k.
cvecE descending(const cvec& x, int r) {
    cvecE v(r - 1);
    for (int i = 0; i < r - 1; ++i) v(i) = x[r - 1 - i];
    return v;
}

void store_descending(const cvecE& v, cvec& x, int r) {
    for (int i = 0; i < r - 1; ++i) x[r - 1 - i] = v(i);
}

}  // namespace

IsoLax iso_to_lax(const IsoCoords& iso, const TimeChart& chart, const PoleProfile& profile, Rational f_fault) {
    auto eval = [&](const ProfileMatrix& pm) {
        return f_fault == Rational{} ? pm.evaluate(chart) : perturb_profile(pm, f_fault).evaluate(chart);
    };
    IsoLax out;
    out.omega = omega_profile(iso, chart, profile);
    const cx omega = out.omega;
    LaxCoords& lax = out.lax;
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        cvec Q(r), R(r);
        Q[0] = iso.u_fin.at(s)[0];
        R[0] = iso.v_fin.at(s)[0];
        if (r >= 2) {
            const cmat F = eval(solve_profile_finite(profile, s, chart));
            store_descending(F * descending(iso.u_fin[s], r), Q, r);
            store_descending(F * descending(iso.v_fin[s], r), R, r);
        }
        lax.Q_fin.push_back(Q);
        lax.R_fin.push_back(R);
    }
    const int ri = profile.r_inf;
    if (ri >= 4) {
        const int m = ri - 3;  // Q_{inf,0..r-4}
        const cmat F = eval(solve_profile_infinity(profile, chart));
        cvecE y(m + 1);
        y(0) = 1.0;
        for (int i = 1; i <= m; ++i) y(i) = iso.u_inf.at(m - i);
        const cvecE q = omega * (F * y);
        lax.Q_inf.assign(m, cx{});
        for (int i = 1; i <= m; ++i) lax.Q_inf[m - i] = q(i);

        const RProfiles rp = solve_R_profiles(profile, chart);
        const cmat G = eval(rp.infinity);
        const cvec sh = rp.infinity.evaluate_shift(chart);
        cvecE v(m);
        for (int i = 0; i < m; ++i) v(i) = iso.v_inf.at(m - 1 - i);
        const cvecE R = G * v;
        lax.R_inf.assign(m, cx{});
        for (int i = 0; i < m; ++i) lax.R_inf[m - 1 - i] = sh[i] + R(i);
    }
    return out;
}

IsoCoords lax_to_iso(const LaxCoords& lax, const TimeChart& chart, const PoleProfile& profile, cx omega) {
    IsoCoords iso;
    iso.omega = omega;
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        cvec u(r), v(r);
        u[0] = lax.Q_fin.at(s)[0];
        v[0] = lax.R_fin.at(s)[0];
        if (r >= 2) {
            const cmat F = solve_profile_finite(profile, s, chart).evaluate(chart);
            const auto tri = F.triangularView<Eigen::Lower>();
            store_descending(tri.solve(descending(lax.Q_fin[s], r)), u, r);
            store_descending(tri.solve(descending(lax.R_fin[s], r)), v, r);
        }
        iso.u_fin.push_back(u);
        iso.v_fin.push_back(v);
    }
    const int ri = profile.r_inf;
    if (ri >= 4) {
        if (omega == cx{}) throw ChartError("omega = 0");
        const int m = ri - 3;
        const cmat F = solve_profile_infinity(profile, chart).evaluate(chart);
        cvecE q(m + 1);
        q(0) = omega;
        for (int i = 1; i <= m; ++i) q(i) = lax.Q_inf.at(m - i);
        const cvecE y = F.triangularView<Eigen::Lower>().solve(q / omega);
        iso.u_inf.assign(m, cx{});
        for (int i = 1; i <= m; ++i) iso.u_inf[m - i] = y(i);

        const RProfiles rp = solve_R_profiles(profile, chart);
        const cmat G = rp.infinity.evaluate(chart);
        const cvec sh = rp.infinity.evaluate_shift(chart);
        cvecE rhs(m);
        for (int i = 0; i < m; ++i) rhs(i) = lax.R_inf.at(m - 1 - i) - sh[i];
        const cvecE v = G.triangularView<Eigen::Lower>().solve(rhs);
        iso.v_inf.assign(m, cx{});
        for (int i = 0; i < m; ++i) iso.v_inf[m - 1 - i] = v(i);
    }
    return iso;
}

namespace {

struct Residual {
    double diff = 0, scale = 0;
    void add(cx lhs, cx rhs) {
        diff = std::max(diff, std::abs(lhs - rhs));
        scale = std::max(scale, std::abs(rhs));
    }
    double value() const { return diff / (1.0 + scale); }
};

// d column / d z_c for every variable by central differences.
std::vector<cvec> fd_columns(const std::function<cvec(const cvec&)>& col, const cvec& z, double h) {
    std::vector<cvec> out;
    for (size_t c = 0; c < z.size(); ++c) {
        const double step = h * std::max(1.0, std::abs(z[c]));
        cvec zp = z, zm = z;
        zp[c] += step;
        zm[c] -= step;
        const cvec fp = col(zp), fm = col(zm);
        cvec d(fp.size());
        for (size_t i = 0; i < fp.size(); ++i) d[i] = (fp[i] - fm[i]) / (2.0 * step);
        out.push_back(d);
    }
    return out;
}

cvec column_at(const ProfileMatrix& pm, int j, const cvec& z) {
    cvec v(pm.size(), cx{});
    for (int i = j; i < pm.size(); ++i) v[i] = pm.F[i][j](z);
    return v;
}

}  // namespace

double ode_residual(const ProfileMatrix& pm, const TimeChart& chart, double h) {
    const cvec z = pm.var_values(chart);
    const int r = pm.r;
    Residual res;
    switch (pm.kind) {
        case ProfileMatrix::Kind::finite: {
            // tau_i = z_{i-1}; d_a = 1/(r-a)
            const int n = pm.size();
            auto d = [&](int a) { return 1.0 / (r - a); };
            for (int j = 0; j < n; ++j) {
                auto col = [&](const cvec& zz) { return column_at(pm, j, zz); };
                const cvec F = col(z);
                const auto dF = fd_columns(col, z, h);
                for (int a = 1; a <= n; ++a)
                    for (int c = 1; c <= n; ++c) {
                        cx lhs{};
                        for (int b = 1; b <= a; ++b) lhs += z[a - b] * d(b) * dF[c - 1][b - 1];
                        const cx rhs = a >= c ? F[a - c] * d(c) : cx{};
                        res.add(lhs, rhs);
                    }
            }
            break;
        }
        case ProfileMatrix::Kind::infinity_Q: {
            const int nv = r - 4;
            auto mu = [&](int i) { return i == 1 ? cx(1.0) : i == 2 ? cx{} : z[i - 3]; };
            for (int j = 0; j < pm.size(); ++j) {
                auto col = [&](const cvec& zz) { return column_at(pm, j, zz); };
                const cvec V = col(z);  // V[i-1] = V_i
                const auto dV = fd_columns(col, z, h);
                for (int a = 1; a <= nv; ++a)
                    for (int c = 1; c <= nv; ++c) {
                        cx lhs{};
                        for (int b = 1; b <= a; ++b) lhs += mu(a - b + 1) * dV[c - 1][b + 1] / double(r - 3 - b);
                        const cx rhs = a - c + 1 >= 1 ? V[a - c] / double(r - 2 - c) : cx{};
                        res.add(lhs, rhs);
                    }
            }
            break;
        }
        case ProfileMatrix::Kind::infinity_R: {
            const int n = pm.size();
            auto mu = [&](int i) { return i == 1 ? cx(1.0) : i == 2 ? cx{} : z[i - 3]; };
            // the affine solution shift + G w for w = 0 and each unit w
            for (int j = -1; j < n; ++j) {
                auto full = [&](const cvec& zz) {
                    cvec R(n);
                    for (int a = 0; a < n; ++a) R[a] = pm.shift[a](zz);
                    if (j >= 0) {
                        const cvec g = column_at(pm, j, zz);
                        for (int a = 0; a < n; ++a) R[a] += g[a];
                    }
                    return R;
                };
                const cvec R = full(z);
                const auto dR = fd_columns(full, z, h);
                auto tcol = [&](int i) { return i == 1 ? cx(-1.0) : i == 2 ? cx{} : R[i - 3]; };
                for (int a = 1; a <= n; ++a)
                    for (int c = 1; c <= n; ++c) {
                        cx lhs{};
                        for (int b = 1; b <= a; ++b) lhs += mu(a - b + 1) * dR[c - 1][b - 1] / double(r - 2 - b);
                        const cx rhs = a >= c ? tcol(a - c + 1) / double(r - 2 - c) : cx{};
                        res.add(lhs, rhs);
                    }
            }
            break;
        }
    }
    return res.value();
}

namespace {

struct ChartPoint {
    LaxCoords lax;
    cx omega{1.0};
};
using ChartAt = std::function<ChartPoint(const PoleProfile&, const TimeChart&)>;

double condition_residual(const ChartAt& chart_at, const DeformationVector& alpha, const TimeChart& chart,
                          const PoleProfile& profile, const IsoOptions& opt) {
    if (alpha.empty()) return 0.0;
    require_unfrozen(alpha, chart);
    cvec poles;
    for (const auto& p : profile.poles) poles.push_back(p.x);
    const cvec pts = sample_points(poles, opt.samples, opt.seed);

    std::vector<std::vector<Mat2>> vals;
    for (double m : {-2.0, -1.0, 1.0, 2.0}) {
        PoleProfile p = profile;
        TimeChart c = chart;
        shift_along(p, c, alpha, m * opt.h);
        const ChartPoint cp = chart_at(p, c);
        const GeoLax l = build_geo_L_QR(cp.lax, c, p, cp.omega);
        std::vector<Mat2> row;
        for (cx z : pts) row.push_back(l.at(z));
        vals.push_back(row);
    }

    const ChartPoint base = chart_at(profile, chart);
    GeoAOptions o;
    o.nu_fault = opt.nu_fault;
    GeoDeformation A = build_geo_A(alpha, base.lax, chart, profile, base.omega, o);
    if (profile.r_inf == 1) {
        o.L_omega = lie_omega(A.nu_ext, profile, base.omega);
        A = build_geo_A(alpha, base.lax, chart, profile, base.omega, o);
    }
    const RationalFunction d11 = A.A11.derivative(), d12 = A.A12.derivative(), d21 = A.A21.derivative();

    double worst = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        const Mat2 dL = (vals[0][i] - 8.0 * vals[1][i] + 8.0 * vals[2][i] - vals[3][i]) / (12.0 * opt.h);
        Mat2 dA;
        dA << d11(pts[i]), d12(pts[i]), d21(pts[i]), -d11(pts[i]);
        worst = std::max(worst, relative_defect(dL, dA));
    }
    return worst;
}

}  // namespace

double isospectral_residual(const IsoCoords& iso, const DeformationVector& alpha, const TimeChart& chart,
                            const PoleProfile& profile, const IsoOptions& opt) {
    ChartAt at = [&](const PoleProfile& p, const TimeChart& c) {
        const IsoLax il = iso_to_lax(iso, c, p, opt.f_fault);
        return ChartPoint{il.lax, il.omega};
    };
    return condition_residual(at, alpha, chart, profile, opt);
}

double frozen_chart_residual(const LaxCoords& lax, cx omega, const DeformationVector& alpha, const TimeChart& chart,
                             const PoleProfile& profile, const IsoOptions& opt) {
    ChartAt at = [&](const PoleProfile&, const TimeChart&) { return ChartPoint{lax, omega}; };
    return condition_residual(at, alpha, chart, profile, opt);
}

double iso_hamiltonian_defect(const IsoCoords& iso, TimeKey key, const TimeChart& chart, const PoleProfile& profile,
                              double h, double invariant_weight, Rational f_fault) {
    // (Q, P) at fixed (u, v) is explicit in t, and so is (q, p) -> (Q, P). Solving
    // J X = d(Q, P)/dt keeps root finding out of the difference quotients.
    auto geo_at = [&](const PoleProfile& p, const TimeChart& c) {
        const IsoLax il = iso_to_lax(iso, c, p, f_fault);
        const GeoLax l = build_geo_L_QR(il.lax, c, p, il.omega);
        return lax_to_geo(il.lax, p, c, il.omega, l.g0);
    };
    const GeoCoords geo0 = geo_at(profile, chart);
    const cx omega = omega_profile(iso, chart, profile);
    const cvec z0 = flatten(geo_to_qp(geo0, omega, profile));
    const size_t n = z0.size();
    const size_t g = n / 2;

    DeformationVector alpha;
    alpha.alpha[key] = 1.0;
    std::vector<cvec> w;
    cvec om;
    for (double m : {-2.0, -1.0, 1.0, 2.0}) {
        PoleProfile p = profile;
        TimeChart c = chart;
        shift_along(p, c, alpha, m * h);
        w.push_back(flatten(geo_at(p, c)));
        om.push_back(omega_profile(iso, c, p));
    }
    auto stencil = [&](cx a, cx b, cx c, cx d, double step) { return (a - 8.0 * b + 8.0 * c - d) / (12.0 * step); };
    cvecE dG(static_cast<Eigen::Index>(w[0].size()));
    for (Eigen::Index i = 0; i < dG.size(); ++i) dG(i) = stencil(w[0][i], w[1][i], w[2][i], w[3][i], h);
    // For r_inf = 1 omega moves with t and (Q, P) depends on it at fixed (q, p).
    const cx d_omega = stencil(om[0], om[1], om[2], om[3], h);
    if (d_omega != cx{}) {
        const double e = h * std::max(1.0, std::abs(omega));
        std::vector<cvec> v;
        for (double m : {-2.0, -1.0, 1.0, 2.0}) v.push_back(flatten(qp_to_geo(unflatten_oper(z0), omega + m * e, profile)));
        for (Eigen::Index i = 0; i < dG.size(); ++i) dG(i) -= stencil(v[0][i], v[1][i], v[2][i], v[3][i], e) * d_omega;
    }
    VectorMap to_geo = [&](const cvec& x) { return flatten(qp_to_geo(unflatten_oper(x), omega, profile)); };
    const cmat Jg = fd_jacobian(to_geo, z0, h);
    const cvecE Xe = Jg.colPivHouseholderQr().solve(dG);
    const cvec X(Xe.data(), Xe.data() + Xe.size());

    VectorMap K = [&](const cvec& x) {
        const OperCoords oper = unflatten_oper(x);
        const GeoCoords geo = qp_to_geo(oper, omega, profile);
        const auto ham = hamiltonians_geo(geo, chart, profile, omega);
        const GeoLax l = build_geo_L_QP(geo, chart, profile, omega, 1e-6);
        return cvec{ham.at(key) - invariant_weight * spectral_invariants(l, chart, profile).I.at(key)};
    };
    // K is holomorphic, so its gradient comes from the trapezoidal rule on small circles; this
    // tolerates a radius far above the roundoff-limited FD step.
    cmat J(1, static_cast<Eigen::Index>(n));
    constexpr int kNodes = 8;
    for (size_t i = 0; i < n; ++i) {
        const double rho = kCauchyRadius * std::max(1.0, std::abs(z0[i]));
        cx acc{};
        for (int m = 0; m < kNodes; ++m) {
            const cx e = std::polar(1.0, 2.0 * std::numbers::pi * m / kNodes);
            cvec x = z0;
            x[i] += rho * e;
            acc += K(x)[0] / e;
        }
        J(0, static_cast<Eigen::Index>(i)) = acc / (kNodes * rho);
    }
    double diff = 0, scale = 0;
    for (size_t i = 0; i < g; ++i) {
        diff = std::max(diff, std::abs(X[i] - J(0, static_cast<Eigen::Index>(g + i))));
        diff = std::max(diff, std::abs(X[g + i] + J(0, static_cast<Eigen::Index>(i))));
        scale = std::max({scale, std::abs(X[i]), std::abs(X[g + i])});
    }
    return diff / (1.0 + scale);
}

}  // namespace laxforge
