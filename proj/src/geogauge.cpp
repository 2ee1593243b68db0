#include "laxforge/geogauge.hpp"

#include <algorithm>

namespace laxforge {

namespace {

constexpr double kMaxStride = 1e-3;

RationalFunction linear(cx c0, cx c1) { return RationalFunction(Poly(cvec{c0, c1})); }

cx sum_first(const std::vector<cvec>& q_fin) {
    cx s{};
    for (const auto& q : q_fin) s += q[0];
    return s;
}

// Q_{inf,k} with Q_{inf,-1} := sum_s Q_{X_s,1}.
cx q_inf_at(const cvec& q_inf, const std::vector<cvec>& q_fin, int k) {
    if (k == -1) return sum_first(q_fin);
    return k >= 0 && k < static_cast<int>(q_inf.size()) ? q_inf[k] : cx{};
}

cx at_or_zero(const cvec& v, int k) { return k >= 0 && k < static_cast<int>(v.size()) ? v[k] : cx{}; }

double coord_scale(const cvec& a, const cvec& b) {
    double m = 1.0;
    for (cx v : a) m = std::max(m, std::abs(v));
    double n = 1.0;
    for (cx v : b) n = std::max(n, std::abs(v));
    return m * n;
}

void check_constraints(const std::vector<ConstraintViolation>& v, double tol, double scale) {
    for (const auto& c : v)
        if (c.residual > tol * scale) throw ChartError("chart constraint violated: " + c.name);
}

void require_shape(const cvec& q_inf, const std::vector<cvec>& q_fin, const cvec& x_inf,
                   const std::vector<cvec>& x_fin, const PoleProfile& profile) {
    const size_t ninf = static_cast<size_t>(std::max(profile.r_inf - 3, 0));
    if (q_inf.size() != ninf || x_inf.size() != ninf || static_cast<int>(q_fin.size()) != profile.n() ||
        static_cast<int>(x_fin.size()) != profile.n())
        throw MalformedInput("chart does not match the pole profile");
    for (int s = 0; s < profile.n(); ++s)
        if (static_cast<int>(q_fin[s].size()) != profile.poles[s].r ||
            static_cast<int>(x_fin[s].size()) != profile.poles[s].r)
            throw MalformedInput("chart does not match pole " + std::to_string(s + 1));
    for (int s = 0; s < profile.n(); ++s)
        if (q_fin[s].back() == cx{})
            throw DegenerateConfiguration("Q_{X" + std::to_string(s + 1) + ",r} = 0");
}

RationalFunction ring_part(const std::vector<cvec>& q_fin, const std::vector<cvec>& p_fin, const PoleProfile& profile) {
    RationalFunction f;
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        for (int k = 1; k <= r; ++k) {
            cx c{};
            for (int m = 1; m <= r + 1 - k; ++m) c += p_fin[s][m - 1] * q_fin[s][k + m - 2];
            f.add_pole_term(profile.poles[s].x, k, c);
        }
    }
    return f;
}

RationalFunction sum_projections(const RationalFunction& extra_num, const RationalFunction& L11sq,
                                 const RationalFunction& L12, const TimeChart& chart, const PoleProfile& profile) {
    RationalFunction out;
    for (int s = 0; s < profile.n(); ++s)
        out += project_minus(times_square_fin(chart, profile, s) + extra_num - L11sq, L12, profile.poles[s].x,
                             -profile.poles[s].r);
    return out;
}

void finish(GeoLax& lax, const TimeChart& chart, const PoleProfile& profile) {
    const int ri = profile.r_inf;
    lax.L22 = -lax.L11;
    const int k = 3 - ri;
    lax.beta = lax.L11.laurent(ExtendedPoint::inf(), k, k).at(k);
    lax.delta = lax.L21.laurent(ExtendedPoint::inf(), k, k).at(k);
    if (ri == 1) lax.mathring_L11 = lax.L11 + linear(lax.g0, chart.inf(0)) * lax.L12 * (1.0 / lax.omega);
}

// L21 from L11 for r_inf >= 2.
RationalFunction geo_L21(const RationalFunction& L11, const RationalFunction& L12, const TimeChart& chart,
                         const PoleProfile& profile) {
    const RationalFunction sq = L11 * L11;
    RationalFunction out = sum_projections({}, sq, L12, chart, profile);
    if (profile.r_inf >= 3) out += project_plus(times_square_inf(chart, profile) - sq, L12, 3 - profile.r_inf);
    return out;
}

}  // namespace

Mat2 GeoLax::at(cx lambda) const {
    Mat2 m;
    m << L11(lambda), L12(lambda), L21(lambda), L22(lambda);
    return m;
}

RationalFunction project_minus(const RationalFunction& f, const RationalFunction& g, cx X, int g_order) {
    const int lo = -f.pole_order(X) - g_order;
    if (lo >= 0) return {};
    return singular_from_slice(laurent_quotient(f, g, ExtendedPoint::at(X), g_order, lo, -1));
}

RationalFunction project_plus(const RationalFunction& f, const RationalFunction& g, int g_order) {
    const int deg = f.poly().degree();
    const int lo = deg >= 0 ? -deg - g_order : 1 - g_order;
    if (lo > 0) return {};
    return singular_from_slice(laurent_quotient(f, g, ExtendedPoint::inf(), g_order, lo, 0));
}

RationalFunction times_square_fin(const TimeChart& chart, const PoleProfile& profile, int s) {
    const int r = profile.poles[s].r;
    RationalFunction f;
    for (int j = r + 1; j <= 2 * r; ++j) {
        cx c{};
        for (int m = 0; m <= 2 * r - j; ++m) c += chart.fin(s, r - 1 - m) * chart.fin(s, j + m - r - 1);
        f.add_pole_term(profile.poles[s].x, j, c);
    }
    return f;
}

RationalFunction times_square_inf(const TimeChart& chart, const PoleProfile& profile) {
    const int r = profile.r_inf;
    RationalFunction f;
    for (int j = r - 3; j <= 2 * r - 4; ++j) {
        cx c{};
        for (int m = 0; m <= 2 * r - 4 - j; ++m) c += chart.inf(r - 1 - m) * chart.inf(j + m - r + 3);
        f.add_poly_term(j, c);
    }
    return f;
}

cx third_moment(const std::vector<cvec>& q_fin, const PoleProfile& profile) {
    cx s3{};
    for (int s = 0; s < profile.n(); ++s) {
        const cx X = profile.poles[s].x;
        s3 += X * X * q_fin[s][0] + 2.0 * X * at_or_zero(q_fin[s], 1) + at_or_zero(q_fin[s], 2);
    }
    return s3;
}

namespace {

// The g0-free part of L21 at r_inf = 1 without the quotient term ring * L12' / L12.
RationalFunction super_rational(const RationalFunction& ring, const RationalFunction& L12, const TimeChart& chart,
                                const PoleProfile& profile, cx omega) {
    const cx t0 = chart.inf(0);
    RationalFunction f = ring * ring + ring.derivative() + L12 * ((t0 * t0 - t0) / omega);
    f += L12 * sum_projections({}, ring * ring, L12, chart, profile);
    return f;
}

}  // namespace

cx g0_ring(const RationalFunction& ring, const RationalFunction& L12, const std::vector<cvec>& q_fin,
           const TimeChart& chart, const PoleProfile& profile, cx omega) {
    const cx t0 = chart.inf(0);
    if (t0 == cx{}) throw DegenerateConfiguration("g0 needs t_inf,0 != 0 when r_inf = 1");
    const auto inf = ExtendedPoint::inf();
    cx c3 = super_rational(ring, L12, chart, profile, omega).laurent(inf, 3, 3).at(3);
    c3 -= laurent_quotient(ring * L12.derivative(), L12, inf, 2, 3, 3).at(3);
    return (0.5 - t0) / omega * third_moment(q_fin, profile) + c3 / (2.0 * t0);
}

cx super_L21_at(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile, cx lambda) {
    const RationalFunction& ring = lax.mathring_L11;
    cx v = super_rational(ring, lax.L12, chart, profile, lax.omega)(lambda);
    return v - ring(lambda) * lax.L12.derivative()(lambda) / lax.L12(lambda);
}

cx geo_g0(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile, cx omega) {
    if (profile.r_inf >= 2) return g0_from_Q(geo.Q_inf, geo.Q_fin, profile, chart, omega);
    const RationalFunction L12 = build_L12(geo.Q_inf, geo.Q_fin, omega, profile);
    return g0_ring(ring_part(geo.Q_fin, geo.P_fin, profile), L12, geo.Q_fin, chart, profile, omega);
}

GeoLax build_geo_L_QP(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile, cx omega,
                      double tol) {
    require_shape(geo.Q_inf, geo.Q_fin, geo.P_inf, geo.P_fin, profile);
    if (omega == cx{}) throw ChartError("omega = 0");
    check_constraints(validate_chart_constraints(geo, profile, omega), tol,
                      (1.0 + std::abs(omega)) * coord_scale(flatten_Q(geo.Q_inf, geo.Q_fin),
                                                            flatten_Q(geo.P_inf, geo.P_fin)));
    const int ri = profile.r_inf;
    const cx t = chart.inf(ri - 1);

    GeoLax lax;
    lax.omega = omega;
    lax.L12 = build_L12(geo.Q_inf, geo.Q_fin, omega, profile);
    lax.g0 = geo_g0(geo, chart, profile, omega);
    const RationalFunction ring = ring_part(geo.Q_fin, geo.P_fin, profile);

    RationalFunction poly;
    for (int k = 0; k <= ri - 4; ++k) poly.add_poly_term(k, -omega * geo.P_inf[ri - 4 - k]);
    for (int k = 0; k <= ri - 5; ++k)
        for (int m = 0; m <= ri - 5 - k; ++m) poly.add_poly_term(k, -geo.P_inf[m] * geo.Q_inf[k + 1 + m]);
    const RationalFunction shift = linear(lax.g0, t) * lax.L12 * (1.0 / omega);
    lax.L11 = poly + ring - shift;

    if (ri >= 2) {
        lax.L21 = geo_L21(lax.L11, lax.L12, chart, profile);
    } else {
        const RationalFunction u = linear(lax.g0, t) * (1.0 / omega);
        lax.L21 = sum_projections({}, ring * ring, lax.L12, chart, profile) + u * ring * 2.0 - u * u * lax.L12 +
                  RationalFunction::constant(t * t / omega);
    }
    finish(lax, chart, profile);
    return lax;
}

GeoLax build_geo_L_QR(const LaxCoords& lc, const TimeChart& chart, const PoleProfile& profile, cx omega,
                      double tol) {
    require_shape(lc.Q_inf, lc.Q_fin, lc.R_inf, lc.R_fin, profile);
    if (omega == cx{}) throw ChartError("omega = 0");
    const int ri = profile.r_inf;
    const cx t = chart.inf(ri - 1);

    GeoLax lax;
    lax.omega = omega;
    lax.L12 = build_L12(lc.Q_inf, lc.Q_fin, omega, profile);
    if (ri >= 2) {
        lax.g0 = g0_from_Q(lc.Q_inf, lc.Q_fin, profile, chart, omega);
    } else {
        cx v = -chart.inf(0) / omega * third_moment(lc.Q_fin, profile);
        for (int s = 0; s < profile.n(); ++s)
            v -= profile.poles[s].x * lc.R_fin[s][0] + at_or_zero(lc.R_fin[s], 1);
        lax.g0 = v;
    }
    check_constraints(validate_chart_constraints(lc, profile, chart, omega, lax.g0), tol,
                      (1.0 + std::abs(omega)) * coord_scale(flatten_Q(lc.Q_inf, lc.Q_fin),
                                                            flatten_Q(lc.R_inf, lc.R_fin)));

    RationalFunction L11;
    for (int s = 0; s < profile.n(); ++s)
        for (int k = 1; k <= profile.poles[s].r; ++k) L11.add_pole_term(profile.poles[s].x, k, lc.R_fin[s][k - 1]);
    if (ri >= 2) L11.add_poly_term(ri - 2, -t);
    if (ri >= 3) L11.add_poly_term(ri - 3, -chart.inf(ri - 2));
    for (int k = 0; k <= ri - 4; ++k) L11.add_poly_term(k, lc.R_inf[k]);
    lax.L11 = std::move(L11);

    if (ri >= 2) {
        lax.L21 = geo_L21(lax.L11, lax.L12, chart, profile);
    } else {
        // The constant printed with this display (t0/omega - t0^2/omega) contradicts the decay
        // L21 = O(lambda^-2) forced by the normalization; the projections alone are used.
        lax.L21 = sum_projections({}, lax.L11 * lax.L11, lax.L12, chart, profile);
    }
    finish(lax, chart, profile);
    return lax;
}

Mat2 GeoDeformation::at(cx lambda) const {
    Mat2 m;
    m << A11(lambda), A12(lambda), A21(lambda), A22(lambda);
    return m;
}

namespace {

struct NuSums {
    cx s1{}, s2{};
};

NuSums nu_sums(const CoeffMap& nu, const std::vector<cvec>& q_fin, const PoleProfile& profile) {
    NuSums out;
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        const cx X = profile.poles[s].x;
        for (int k = 1; k <= r; ++k) {
            out.s1 += coeff_at(nu, s, k - 1) * q_fin[s][k - 1];
            out.s2 += X * coeff_at(nu, s, k - 1) * q_fin[s][k - 1];
            if (k >= 2) out.s2 += coeff_at(nu, s, k - 2) * q_fin[s][k - 1];
        }
    }
    return out;
}

}  // namespace

CoeffMap extend_nu(const CoeffMap& nu, const cvec& q_inf, const std::vector<cvec>& q_fin, const PoleProfile& profile,
                   cx omega) {
    CoeffMap out = nu;
    const int ri = profile.r_inf;
    const NuSums ns = nu_sums(nu, q_fin, profile);
    if (ri >= 3) {
        cx a = ns.s1;
        for (int j = 1; j <= ri - 3; ++j) a -= coeff_at(out, -1, j) * q_inf_at(q_inf, q_fin, j - 1);
        out[{-1, ri - 2}] = a / omega;
        cx b = ns.s2 - coeff_at(out, -1, 1) * sum_first(q_fin);
        for (int j = 2; j <= ri - 2; ++j) b -= coeff_at(out, -1, j) * q_inf_at(q_inf, q_fin, j - 2);
        out[{-1, ri - 1}] = b / omega;
    } else if (ri == 2) {
        out[{-1, 0}] = ns.s1 / omega;
    } else {
        const cx nm1 = ns.s1 / omega;
        out[{-1, -1}] = nm1;
        out[{-1, 0}] = (ns.s2 - third_moment(q_fin, profile) * nm1) / omega;
    }
    return out;
}

std::vector<ConstraintViolation> extra_condition_residuals(const CoeffMap& nu, const std::vector<cvec>& q_fin,
                                                           const PoleProfile& profile, cx omega) {
    std::vector<ConstraintViolation> out;
    const NuSums ns = nu_sums(nu, q_fin, profile);
    if (profile.r_inf == 2) {
        out.push_back({"sum nu Q = omega nu_inf,0", std::abs(ns.s1 - omega * coeff_at(nu, -1, 0))});
    } else if (profile.r_inf == 1) {
        const cx nm1 = coeff_at(nu, -1, -1);
        out.push_back({"omega nu_inf,-1 = sum nu Q", std::abs(omega * nm1 - ns.s1)});
        out.push_back({"S3 nu_inf,-1 + omega nu_inf,0 = shifted sum",
                       std::abs(third_moment(q_fin, profile) * nm1 + omega * coeff_at(nu, -1, 0) - ns.s2)});
    }
    return out;
}

cx lie_omega(const CoeffMap& nu_ext, const PoleProfile& profile, cx omega) {
    return profile.r_inf == 1 ? -omega * coeff_at(nu_ext, -1, -1) : cx{};
}

namespace {

struct Prepared {
    GeoLax lax;
    CoeffMap nu;
    cx C{};  // constant of A11
};

Prepared prepare(const DeformationVector& alpha, GeoLax lax, const cvec& q_inf, const std::vector<cvec>& q_fin,
                 const TimeChart& chart, const PoleProfile& profile, cx omega, const GeoAOptions& opt) {
    Prepared p;
    p.lax = std::move(lax);
    CoeffMap nu = nu_coeffs(alpha, chart, profile);
    for (auto& [key, v] : nu) v *= 1.0 + opt.nu_fault;
    if (opt.nu) {
        for (const auto& [key, v] : *opt.nu)
            if (key.first == -1 && key.second <= 0) nu[key] = v;
        double scale = 1.0;
        for (const auto& [key, v] : nu) scale = std::max(scale, std::abs(v));
        check_constraints(extra_condition_residuals(nu, q_fin, profile, omega), opt.tol,
                          scale * coord_scale(flatten_Q(q_inf, q_fin), {omega}));
        if (profile.r_inf >= 3) nu = extend_nu(nu, q_inf, q_fin, profile, omega);
    } else {
        nu = extend_nu(nu, q_inf, q_fin, profile, omega);
    }
    p.nu = std::move(nu);
    const int ri = profile.r_inf;
    p.C = opt.L_omega / (2.0 * omega);
    if (ri == 2) p.C -= chart.inf(1) * coeff_at(p.nu, -1, 0);
    if (ri == 1) p.C += (0.5 - chart.inf(0)) * coeff_at(p.nu, -1, -1);
    return p;
}

RationalFunction geo_A12(const CoeffMap& nu, const cvec& q_inf, const std::vector<cvec>& q_fin,
                         const PoleProfile& profile, cx omega) {
    const int ri = profile.r_inf;
    RationalFunction f;
    if (ri >= 4) f.add_poly_term(ri - 4, omega * coeff_at(nu, -1, 1));
    for (int j = 0; j <= ri - 5; ++j) {
        cx c = omega * coeff_at(nu, -1, ri - 3 - j);
        for (int k = j + 1; k <= ri - 4; ++k) c += coeff_at(nu, -1, k - j) * q_inf[k];
        f.add_poly_term(j, c);
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        for (int j = 1; j <= r; ++j) {
            cx c{};
            for (int k = j; k <= r; ++k) c += coeff_at(nu, s, k - j) * q_fin[s][k - 1];
            f.add_pole_term(profile.poles[s].x, j, c);
        }
    }
    return f;
}

// sum_k (sum_{j>k} c_j nu_{inf,j-k}) lambda^k, k = r_inf-3..2r_inf-5.
RationalFunction nu_numerator_inf(const CoeffMap& nu, const TimeChart& chart, const PoleProfile& profile) {
    const int r = profile.r_inf;
    RationalFunction f;
    for (int k = r - 3; k <= 2 * r - 5; ++k) {
        cx c{};
        for (int j = k + 1; j <= 2 * r - 4; ++j)
            for (int m = 0; m <= 2 * r - 4 - j; ++m)
                c += chart.inf(r - 1 - m) * chart.inf(j + m - r + 3) * coeff_at(nu, -1, j - k);
        f.add_poly_term(k, c);
    }
    return f;
}

RationalFunction nu_numerator_fin(const CoeffMap& nu, const TimeChart& chart, const PoleProfile& profile, int s) {
    const int r = profile.poles[s].r;
    RationalFunction f;
    for (int k = r + 1; k <= 2 * r; ++k) {
        cx c{};
        for (int j = k; j <= 2 * r; ++j)
            for (int m = 0; m <= 2 * r - j; ++m)
                c += chart.fin(s, r - 1 - m) * chart.fin(s, j + m - r - 1) * coeff_at(nu, s, j - k);
        f.add_pole_term(profile.poles[s].x, k, c);
    }
    return f;
}

GeoDeformation assemble(const Prepared& p, RationalFunction A11, const cvec& q_inf, const std::vector<cvec>& q_fin,
                        const TimeChart& chart, const PoleProfile& profile, cx omega, cx L_omega) {
    const int ri = profile.r_inf;
    const GeoLax& lax = p.lax;
    GeoDeformation out;
    out.nu_ext = p.nu;
    out.A12 = geo_A12(p.nu, q_inf, q_fin, profile, omega);
    out.A11 = std::move(A11);

    const RationalFunction cross = lax.L11 * lax.L11 * out.A12 - lax.L11 * lax.L12 * out.A11 * 2.0;
    const RationalFunction L12sq = lax.L12 * lax.L12;
    RationalFunction a21;
    for (int s = 0; s < profile.n(); ++s) {
        const cx X = profile.poles[s].x;
        const int r = profile.poles[s].r;
        a21 += project_minus(nu_numerator_fin(p.nu, chart, profile, s), lax.L12, X, -r);
        a21 += project_minus(cross, L12sq, X, -2 * r);
    }
    if (ri >= 3) {
        const auto inf = ExtendedPoint::inf();
        const cx t = chart.inf(ri - 1);
        cx res = -out.A11.laurent(inf, 1, 1).at(1);
        res += laurent_quotient(lax.L11 * out.A12, lax.L12, inf, 3 - ri, 1, 1).at(1);
        const cx lead = ri >= 4 ? q_inf[ri - 4] : sum_first(q_fin);
        a21 += linear(2.0 / omega * res + lead * L_omega / (omega * omega * omega), -t / (omega * omega) * L_omega);
        a21 += project_plus(nu_numerator_inf(p.nu, chart, profile), lax.L12, 3 - ri);
        a21 += project_plus(cross, L12sq, 2 * (3 - ri));
    }
    // r_inf = 1: the linear term at infinity cancels, and the order lambda^{-1} of the (2,1)
    // compatibility entry then forces a zero constant. The printed constant
    // -2 L_omega (g0 + t0 S3 / omega) / omega^2 assumes a linear coefficient 2 t0 L_omega / omega^2.
    out.A21 = std::move(a21);
    out.A22 = -out.A11;
    return out;
}

}  // namespace

GeoDeformation build_geo_A(const DeformationVector& alpha, const GeoCoords& geo, const TimeChart& chart,
                           const PoleProfile& profile, cx omega, const GeoAOptions& opt) {
    Prepared p = prepare(alpha, build_geo_L_QP(geo, chart, profile, omega), geo.Q_inf, geo.Q_fin, chart, profile,
                         omega, opt);
    const int ri = profile.r_inf;
    const cx t = chart.inf(ri - 1);
    const cx g0 = p.lax.g0;
    const auto& nu = p.nu;
    const auto& Qi = geo.Q_inf;
    const auto& Pi = geo.P_inf;
    auto Q = [&](int k) { return q_inf_at(Qi, geo.Q_fin, k); };
    auto v = [&](int k) { return coeff_at(nu, -1, k); };

    RationalFunction a11 = RationalFunction::constant(p.C);
    if (ri >= 3) a11.add_poly_term(ri - 3, -t * v(1));
    if (ri >= 4) a11.add_poly_term(ri - 4, -t * v(2));
    if (ri >= 5) {
        const cx W = omega * Pi[0] + (t * Q(ri - 5) + Q(ri - 4) * g0) / omega;
        a11.add_poly_term(ri - 5, -(t * v(3) + W * v(1)));
        for (int j = 0; j <= ri - 6; ++j) {
            cx c = t * v(ri - 2 - j) + v(ri - 4 - j) * W;
            for (int i = 1; i <= ri - 5 - j; ++i) {
                cx inner = omega * Pi[ri - 4 - i - j];
                for (int m = 0; m <= ri - 5 - i - j; ++m) inner += Pi[m] * Q(j + i + 1 + m);
                inner += (t * Q(j + i - 1) + g0 * Q(j + i)) / omega;
                c += v(i) * inner;
            }
            a11.add_poly_term(j, -c);
        }
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int rs = profile.poles[s].r;
        const cx X = profile.poles[s].x;
        const auto& Qs = geo.Q_fin[s];
        const auto& Ps = geo.P_fin[s];
        for (int r = 1; r <= rs; ++r) {
            cx c{};
            for (int i = 0; i <= rs - r; ++i) {
                const cx ni = coeff_at(nu, s, i);
                for (int m = 1; m <= rs + 1 - r - i; ++m) c += ni * Ps[m - 1] * Qs[r + i + m - 2];
                c -= (t * X + g0) / omega * ni * Qs[r + i - 1];
                if (i <= rs - 1 - r) c -= t / omega * ni * Qs[r + i];
            }
            a11.add_pole_term(X, r, c);
        }
    }
    return assemble(p, std::move(a11), geo.Q_inf, geo.Q_fin, chart, profile, omega, opt.L_omega);
}

GeoDeformation build_geo_A(const DeformationVector& alpha, const LaxCoords& lc, const TimeChart& chart,
                           const PoleProfile& profile, cx omega, const GeoAOptions& opt) {
    Prepared p = prepare(alpha, build_geo_L_QR(lc, chart, profile, omega), lc.Q_inf, lc.Q_fin, chart, profile, omega, opt);
    const int ri = profile.r_inf;
    auto v = [&](int k) { return coeff_at(p.nu, -1, k); };

    RationalFunction a11 = RationalFunction::constant(p.C);
    for (int j = 0; j <= ri - 3; ++j) a11.add_poly_term(j, -chart.inf(ri - 1) * v(ri - 2 - j));
    for (int j = 0; j <= ri - 4; ++j) a11.add_poly_term(j, -chart.inf(ri - 2) * v(ri - 3 - j));
    for (int j = 0; j <= ri - 5; ++j) {
        cx c{};
        for (int i = 1; i <= ri - 4 - j; ++i) c += v(i) * lc.R_inf[j + i];
        a11.add_poly_term(j, c);
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int rs = profile.poles[s].r;
        for (int j = 1; j <= rs; ++j) {
            cx c{};
            for (int i = 0; i <= rs - j; ++i) c += coeff_at(p.nu, s, i) * lc.R_fin[s][i + j - 1];
            a11.add_pole_term(profile.poles[s].x, j, c);
        }
    }
    return assemble(p, std::move(a11), lc.Q_inf, lc.Q_fin, chart, profile, omega, opt.L_omega);
}

CoeffMap residue_H(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile, bool use_ring) {
    if (use_ring && profile.r_inf != 1) throw UnsupportedProfile("the mathring form exists only for r_inf = 1");
    const RationalFunction& L11 = use_ring ? lax.mathring_L11 : lax.L11;
    RationalFunction rat;
    if (use_ring) {
        rat = super_rational(L11, lax.L12, chart, profile, lax.omega);
    } else {
        rat = L11 * L11 + lax.L21 * lax.L12 + L11.derivative();
    }
    const RationalFunction quot_num = L11 * lax.L12.derivative();

    CoeffMap H;
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        const auto X = ExtendedPoint::at(profile.poles[s].x);
        const LaurentSlice a = rat.laurent(X, -r, -1);
        const LaurentSlice b = laurent_quotient(quot_num, lax.L12, X, -r, -r, -1);
        for (int j = 1; j <= r; ++j) H[{s, j}] = a.at(-j) - b.at(-j);
    }
    const int ri = profile.r_inf;
    if (ri >= 4) {
        const auto inf = ExtendedPoint::inf();
        const LaurentSlice a = rat.laurent(inf, -(ri - 4), 0);
        const LaurentSlice b = laurent_quotient(quot_num, lax.L12, inf, 3 - ri, -(ri - 4), 0);
        for (int j = 0; j <= ri - 4; ++j) H[{-1, j}] = a.at(-j) - b.at(-j);
    }
    return H;
}

std::map<TimeKey, cx> hamiltonians_geo(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile,
                                       cx omega, bool use_ring) {
    const GeoLax lax = build_geo_L_QP(geo, chart, profile, omega);
    return hamiltonians_oper(residue_H(lax, chart, profile, use_ring), chart, profile);
}

Mat2 OperGaugeMatrix::at(cx lambda) const {
    Mat2 m;
    m << 1.0, 0.0, G21(lambda), G22(lambda);
    return m;
}

Mat2 OperGaugeMatrix::dlambda(cx lambda) const {
    Mat2 m;
    m << 0.0, 0.0, G21.derivative()(lambda), G22.derivative()(lambda);
    return m;
}

OperGaugeMatrix build_gauge(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile, cx omega,
                            cx g0) {
    const size_t g = oper.q.size();
    std::vector<std::pair<cx, int>> den;
    for (const auto& p : profile.poles) den.push_back({p.x, p.r});
    const Poly prod = Poly::from_roots(oper.q);

    // Q(lambda) = -sum_i p_i prod_s (q_i - X_s)^{r_s} prod_{j != i} (lambda - q_j)/(q_i - q_j)
    Poly Q;
    for (size_t i = 0; i < g; ++i) {
        cvec others;
        cx w = -oper.p[i];
        for (const auto& p : profile.poles) w *= std::pow(oper.q[i] - p.x, p.r);
        for (size_t j = 0; j < g; ++j) {
            if (j == i) continue;
            others.push_back(oper.q[j]);
            w /= oper.q[i] - oper.q[j];
        }
        Q += Poly::from_roots(others, w);
    }
    const cx t = chart.inf(profile.r_inf - 1);
    OperGaugeMatrix G;
    G.G21 = RationalFunction::from_factored(Poly() - Q - Poly(cvec{g0, t}) * prod, den);
    G.G22 = RationalFunction::from_factored(prod * omega, den);
    return G;
}

Mat2 gauge_L(const OperLax& L, const OperGaugeMatrix& G, cx lambda) {
    const Mat2 g = G.at(lambda);
    return g.inverse() * (L.at(lambda) * g - G.dlambda(lambda));
}

std::vector<Mat2> gauge_A(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                          const PoleProfile& profile, cx omega, const cvec& points, double h) {
    require_unfrozen(alpha, chart);
    const OperLax lax = build_oper_L(oper, chart, profile);
    OperDeformation A = build_oper_A(alpha, oper, lax, chart, profile);
    const cx L_omega = profile.r_inf == 1 ? -omega * coeff_at(A.nu, -1, -1) : cx{};
    if (L_omega != cx{}) A = build_oper_A(alpha, oper, lax, chart, profile, L_omega / omega);
    const OperCoords vel = hamilton_velocity(alpha, oper, chart, profile);

    double speed = 1.0;
    for (size_t i = 0; i < vel.q.size(); ++i) speed = std::max({speed, std::abs(vel.q[i]), std::abs(vel.p[i])});
    for (const auto& [key, a] : alpha.alpha) speed = std::max(speed, std::abs(a));
    speed = std::max(speed, std::abs(L_omega));
    const double step = std::min(h, kMaxStride / speed);

    auto moved = [&](double e) {
        PoleProfile prof = profile;
        TimeChart ch = chart;
        shift_along(prof, ch, alpha, e);
        OperCoords o = oper;
        for (size_t i = 0; i < o.q.size(); ++i) {
            o.q[i] += e * vel.q[i];
            o.p[i] += e * vel.p[i];
        }
        return build_gauge(o, ch, prof, omega + e * L_omega, solve_H(o, ch, prof).g0);
    };
    const OperGaugeMatrix p1 = moved(step), m1 = moved(-step), p2 = moved(2 * step), m2 = moved(-2 * step);
    const OperGaugeMatrix G = build_gauge(oper, chart, profile, omega, lax.g0);

    std::vector<Mat2> out;
    for (cx z : points) {
        const Mat2 dG = (8.0 * (p1.at(z) - m1.at(z)) - (p2.at(z) - m2.at(z))) / (12.0 * step);
        const Mat2 g = G.at(z);
        out.push_back(g.inverse() * (A.at(z) * g - dG));
    }
    return out;
}

double relative_defect(const Mat2& a, const Mat2& b) {
    return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

}  // namespace laxforge
