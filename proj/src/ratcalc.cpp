#include "laxforge/ratcalc.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace laxforge {

namespace {

// binom(k + j - 1, j), the coefficient of the j-th term of (1 - x)^{-k}.
double neg_binom(int k, int j) {
    double b = 1.0;
    for (int i = 1; i <= j; ++i) b = b * (k + i - 1) / i;
    return b;
}

}  // namespace

bool same_point(cx a, cx b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

// ---------------------------------------------------------------- Poly

Poly::Poly(cvec coeffs) : c_(std::move(coeffs)) { trim(); }

Poly Poly::constant(cx c) { return Poly(cvec{c}); }

Poly Poly::monomial(int degree, cx c) {
    cvec v(degree + 1, cx{});
    v[degree] = c;
    return Poly(v);
}

Poly Poly::from_roots(const cvec& roots, cx lead) {
    cvec c{lead};
    for (cx r : roots) {
        cvec n(c.size() + 1, cx{});
        for (size_t i = 0; i < c.size(); ++i) {
            n[i + 1] += c[i];
            n[i] -= r * c[i];
        }
        c = std::move(n);
    }
    return Poly(c);
}

void Poly::trim() {
    while (!c_.empty() && c_.back() == cx{}) c_.pop_back();
}

cx Poly::operator()(cx x) const {
    cx v{};
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * x + *it;
    return v;
}

Poly Poly::derivative() const {
    if (c_.size() <= 1) return {};
    cvec d(c_.size() - 1);
    for (size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
    return Poly(d);
}

cvec Poly::taylor_at(cx a) const {
    // Repeated synthetic division by (lambda - a).
    cvec work = c_;
    cvec out;
    const int n = static_cast<int>(work.size());
    for (int k = 0; k < n; ++k) {
        for (int i = n - 2; i >= k; --i) work[i] += a * work[i + 1];
        out.push_back(work[k]);
    }
    return out;
}

Poly& Poly::operator+=(const Poly& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), cx{});
    for (size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    trim();
    return *this;
}

Poly& Poly::operator-=(const Poly& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), cx{});
    for (size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
    trim();
    return *this;
}

Poly& Poly::operator*=(cx s) {
    for (auto& v : c_) v *= s;
    trim();
    return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    cvec c(a.c_.size() + b.c_.size() - 1, cx{});
    for (size_t i = 0; i < a.c_.size(); ++i)
        for (size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return Poly(c);
}

// ---------------------------------------------------------------- series

cvec series_mul(const cvec& a, const cvec& b, int n) {
    cvec c(n, cx{});
    for (int i = 0; i < n && i < static_cast<int>(a.size()); ++i)
        for (int j = 0; i + j < n && j < static_cast<int>(b.size()); ++j) c[i + j] += a[i] * b[j];
    return c;
}

cvec series_inv(const cvec& a, int n) {
    if (a.empty() || a[0] == cx{}) throw MalformedInput("series inverse of a series with zero constant term");
    cvec b(n, cx{});
    b[0] = 1.0 / a[0];
    for (int k = 1; k < n; ++k) {
        cx s{};
        for (int j = 1; j <= k && j < static_cast<int>(a.size()); ++j) s += a[j] * b[k - j];
        b[k] = -s * b[0];
    }
    return b;
}

cvec series_div(const cvec& a, const cvec& b, int n) { return series_mul(a, series_inv(b, n), n); }

// ---------------------------------------------------------------- RationalFunction

RationalFunction::RationalFunction(Poly p) : poly_(std::move(p)) {}

RationalFunction RationalFunction::constant(cx c) { return RationalFunction(Poly::constant(c)); }

RationalFunction RationalFunction::pole(cx at, int order, cx coeff) {
    RationalFunction f;
    f.add_pole_term(at, order, coeff);
    return f;
}

RationalFunction::PrincipalPart* RationalFunction::find(cx a) {
    for (auto& p : parts_)
        if (same_point(p.at, a)) return &p;
    return nullptr;
}

const RationalFunction::PrincipalPart* RationalFunction::find(cx a) const {
    for (const auto& p : parts_)
        if (same_point(p.at, a)) return &p;
    return nullptr;
}

int RationalFunction::pole_order(cx a) const {
    const auto* p = find(a);
    return p ? static_cast<int>(p->c.size()) : 0;
}

void RationalFunction::add_pole_term(cx a, int k, cx c) {
    if (k <= 0) throw MalformedInput("pole term order must be positive");
    auto* p = find(a);
    if (!p) {
        parts_.push_back({a, {}});
        p = &parts_.back();
    }
    if (static_cast<int>(p->c.size()) < k) p->c.resize(k, cx{});
    p->c[k - 1] += c;
}

void RationalFunction::add_poly_term(int k, cx c) { poly_ += Poly::monomial(k, c); }

cx RationalFunction::operator()(cx x) const {
    cx v = poly_(x);
    for (const auto& p : parts_) {
        cx w = 1.0 / (x - p.at);
        cx acc{};
        for (auto it = p.c.rbegin(); it != p.c.rend(); ++it) acc = (acc + *it) * w;
        v += acc;
    }
    return v;
}

RationalFunction RationalFunction::derivative() const {
    RationalFunction d(poly_.derivative());
    for (const auto& p : parts_) {
        PrincipalPart q{p.at, cvec(p.c.size() + 1, cx{})};
        for (size_t k = 1; k <= p.c.size(); ++k) q.c[k] = -static_cast<double>(k) * p.c[k - 1];
        d.parts_.push_back(std::move(q));
    }
    return d;
}

RationalFunction& RationalFunction::operator+=(const RationalFunction& o) {
    poly_ += o.poly_;
    for (const auto& p : o.parts_)
        for (size_t k = 0; k < p.c.size(); ++k) add_pole_term(p.at, static_cast<int>(k) + 1, p.c[k]);
    return *this;
}

RationalFunction& RationalFunction::operator-=(const RationalFunction& o) { return *this += -o; }

RationalFunction& RationalFunction::operator*=(cx s) {
    poly_ *= s;
    for (auto& p : parts_)
        for (auto& c : p.c) c *= s;
    return *this;
}

RationalFunction RationalFunction::operator-() const {
    RationalFunction f = *this;
    f *= -1.0;
    return f;
}

LaurentSlice RationalFunction::laurent(const ExtendedPoint& a, int k_lo, int k_hi) const {
    if (k_hi < k_lo) throw MalformedInput("empty Laurent window");
    LaurentSlice s{a, k_lo, cvec(k_hi - k_lo + 1, cx{})};
    auto add = [&](int k, cx v) {
        if (k >= k_lo && k <= k_hi) s.coeffs[k - k_lo] += v;
    };
    if (a.infinite) {
        for (int d = 0; d <= poly_.degree(); ++d) add(-d, poly_.coeff(d));
        for (const auto& p : parts_) {
            for (size_t kk = 0; kk < p.c.size(); ++kk) {
                int k = static_cast<int>(kk) + 1;
                if (p.c[kk] == cx{}) continue;
                cx bj = 1.0;
                for (int j = 0; k + j <= k_hi; ++j) {
                    add(k + j, p.c[kk] * neg_binom(k, j) * bj);
                    bj *= p.at;
                }
            }
        }
        return s;
    }
    cvec tay = poly_.taylor_at(a.x);
    for (size_t j = 0; j < tay.size(); ++j) add(static_cast<int>(j), tay[j]);
    for (const auto& p : parts_) {
        if (same_point(p.at, a.x)) {
            for (size_t kk = 0; kk < p.c.size(); ++kk) add(-static_cast<int>(kk) - 1, p.c[kk]);
            continue;
        }
        cx d = a.x - p.at;
        cx dinv = 1.0 / d;
        for (size_t kk = 0; kk < p.c.size(); ++kk) {
            int k = static_cast<int>(kk) + 1;
            if (p.c[kk] == cx{}) continue;
            cx base = p.c[kk] * std::pow(dinv, k);
            cx pw = 1.0;
            for (int j = 0; j <= k_hi; ++j) {
                double sign = (j % 2) ? -1.0 : 1.0;
                add(j, base * sign * neg_binom(k, j) * pw);
                pw *= dinv;
            }
        }
    }
    return s;
}

RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    RationalFunction out;
    std::vector<cx> points;
    for (const auto& p : a.parts_) points.push_back(p.at);
    for (const auto& p : b.parts_) {
        bool seen = false;
        for (cx x : points) seen = seen || same_point(x, p.at);
        if (!seen) points.push_back(p.at);
    }
    for (cx x : points) {
        int ma = a.pole_order(x), mb = b.pole_order(x);
        if (ma + mb == 0) continue;
        auto sa = a.laurent(ExtendedPoint::at(x), -ma, std::max(mb - 1, -ma));
        auto sb = b.laurent(ExtendedPoint::at(x), -mb, std::max(ma - 1, -mb));
        for (int k = -(ma + mb); k <= -1; ++k) {
            cx v{};
            for (int i = -ma; i <= sa.k_hi(); ++i) v += sa.at(i) * sb.at(k - i);
            if (v != cx{}) out.add_pole_term(x, -k, v);
        }
        // keep the declared order even if the leading coefficient vanished exactly
        if (out.pole_order(x) < ma + mb) out.add_pole_term(x, ma + mb, cx{});
    }
    int da = std::max(a.poly_.degree(), 0), db = std::max(b.poly_.degree(), 0);
    if (!a.poly_.is_zero() || !b.poly_.is_zero()) {
        auto sa = a.laurent(ExtendedPoint::inf(), -da, db);
        auto sb = b.laurent(ExtendedPoint::inf(), -db, da);
        cvec c(da + db + 1, cx{});
        for (int k = -(da + db); k <= 0; ++k) {
            cx v{};
            for (int i = -da; i <= db; ++i) v += sa.at(i) * sb.at(k - i);
            c[-k] = v;
        }
        out.poly_ = Poly(c);
    }
    return out;
}

Poly RationalFunction::den() const {
    Poly d = Poly::constant(1.0);
    for (const auto& p : parts_)
        for (size_t k = 0; k < p.c.size(); ++k) d = d * Poly(cvec{-p.at, 1.0});
    return d;
}

Poly RationalFunction::num() const {
    Poly n = poly_ * den();
    for (size_t i = 0; i < parts_.size(); ++i) {
        Poly others = Poly::constant(1.0);
        for (size_t j = 0; j < parts_.size(); ++j)
            if (j != i)
                for (size_t k = 0; k < parts_[j].c.size(); ++k) others = others * Poly(cvec{-parts_[j].at, 1.0});
        const auto& p = parts_[i];
        const int m = static_cast<int>(p.c.size());
        for (int k = 1; k <= m; ++k) {
            Poly t = Poly::constant(p.c[k - 1]);
            for (int e = 0; e < m - k; ++e) t = t * Poly(cvec{-p.at, 1.0});
            n += t * others;
        }
    }
    return n;
}

RationalFunction RationalFunction::from_factored(const Poly& num, const std::vector<std::pair<cx, int>>& den) {
    RationalFunction f;
    for (const auto& [a, m] : den) {
        if (m <= 0) continue;
        // num / prod_{b != a}(x + a - b)^{m_b}, expanded in x = lambda - a
        cvec top = num.taylor_at(a);
        cvec bottom{1.0};
        for (const auto& [b, mb] : den) {
            if (same_point(a, b) || mb <= 0) continue;
            for (int e = 0; e < mb; ++e) bottom = series_mul(bottom, cvec{a - b, 1.0}, m);
        }
        cvec q = series_div(top, bottom, m);
        for (int k = 1; k <= m; ++k) f.add_pole_term(a, k, q[m - k]);
    }
    // polynomial part: lambda^{n-D} Ntilde(w) / Dtilde(w), w = 1/lambda
    int D = 0;
    for (const auto& [b, mb] : den) D += std::max(mb, 0);
    int excess = num.degree() - D;
    if (excess >= 0) {
        const int len = excess + 1;
        cvec nt(len, cx{});
        for (int i = 0; i < len; ++i) nt[i] = num.coeff(num.degree() - i);
        cvec dt{1.0};
        for (const auto& [b, mb] : den)
            for (int e = 0; e < mb; ++e) dt = series_mul(dt, cvec{1.0, -b}, len);
        cvec q = series_div(nt, dt, len);
        cvec pc(len, cx{});
        for (int i = 0; i < len; ++i) pc[excess - i] = q[i];
        f.poly_ = Poly(pc);
    }
    return f;
}

RationalFunction RationalFunction::from_num_den(const Poly& num, const Poly& den, double cluster_tol) {
    if (den.is_zero()) throw MalformedInput("denominator is identically zero");
    const int d = den.degree();
    std::vector<std::pair<cx, int>> factors;
    if (d > 0) {
        Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d, d);
        for (int i = 1; i < d; ++i) C(i, i - 1) = 1.0;
        for (int i = 0; i < d; ++i) C(i, d - 1) = -den.coeff(i) / den.leading();
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
        std::vector<std::pair<cx, int>> sums;
        for (int i = 0; i < d; ++i) {
            cx r = es.eigenvalues()(i);
            bool merged = false;
            for (auto& [c, m] : sums) {
                if (std::abs(c / double(m) - r) < cluster_tol * (1.0 + std::abs(r))) {
                    c += r;
                    ++m;
                    merged = true;
                    break;
                }
            }
            if (!merged) sums.push_back({r, 1});
        }
        for (auto& [c, m] : sums) factors.push_back({c / double(m), m});
    }
    return from_factored(num * (1.0 / den.leading()), factors);
}

LaurentSlice laurent_slice(const RationalFunction& f, const ExtendedPoint& a, int k_lo, int k_hi) {
    return f.laurent(a, k_lo, k_hi);
}

RationalFunction singular_part(const RationalFunction& f, cx a) {
    RationalFunction out;
    for (const auto& p : f.parts())
        if (same_point(p.at, a))
            for (size_t k = 0; k < p.c.size(); ++k) out.add_pole_term(p.at, static_cast<int>(k) + 1, p.c[k]);
    return out;
}

Poly polynomial_part_at_infinity(const RationalFunction& f) { return f.poly(); }

LaurentSlice laurent_quotient(const RationalFunction& f, const RationalFunction& g, const ExtendedPoint& a,
                              int g_order, int k_lo, int k_hi) {
    // Start the division at the leading order of f so no numerator term is dropped.
    const int f_lo = a.infinite ? (f.poly().is_zero() ? 1 : -f.poly().degree()) : -f.pole_order(a.x);
    const int lo = std::min(k_lo, f_lo - g_order);
    const int len = k_hi - lo + 1;
    if (len <= 0) return {a, k_lo, cvec(std::max(k_hi - k_lo + 1, 0), cx{})};
    auto sf = f.laurent(a, lo + g_order, k_hi + g_order);
    auto sg = g.laurent(a, g_order, g_order + len - 1);
    if (sg.coeffs[0] == cx{}) throw DegenerateConfiguration("divisor has a vanishing leading coefficient");
    cvec q = series_div(sf.coeffs, sg.coeffs, len);
    return {a, k_lo, cvec(q.begin() + (k_lo - lo), q.end())};
}

RationalFunction singular_from_slice(const LaurentSlice& s) {
    RationalFunction out;
    for (int k = s.k_lo; k <= s.k_hi(); ++k) {
        if (s.point.infinite) {
            if (k <= 0) out.add_poly_term(-k, s.at(k));
        } else if (k < 0) {
            out.add_pole_term(s.point.x, -k, s.at(k));
        }
    }
    return out;
}

PartialFractions partial_fractions(const RationalFunction& f, const PoleProfile& profile, double tol) {
    double scale = 1.0;
    for (cx c : f.poly().coeffs()) scale = std::max(scale, std::abs(c));
    for (const auto& p : f.parts())
        for (cx c : p.c) scale = std::max(scale, std::abs(c));

    PartialFractions out;
    for (const auto& p : f.parts()) {
        int s = -1;
        for (int i = 0; i < profile.n(); ++i)
            if (same_point(profile.poles[i].x, p.at)) s = i;
        for (size_t kk = 0; kk < p.c.size(); ++kk) {
            int k = static_cast<int>(kk) + 1;
            bool negligible = std::abs(p.c[kk]) <= tol * scale;
            if (s < 0) {
                if (!negligible) throw ChartError("pole outside the profile");
                continue;
            }
            if (k > profile.poles[s].r) {
                if (!negligible) throw ChartError("pole order exceeds the profile at X" + std::to_string(s + 1));
                continue;
            }
            out.coeff[{s, k}] = p.c[kk];
        }
    }
    for (int k = 0; k <= f.poly().degree(); ++k) {
        if (k > std::max(profile.r_inf - 1, 0) && std::abs(f.poly().coeff(k)) > tol * scale)
            throw ChartError("polynomial part exceeds the order at infinity");
        out.coeff[{-1, k}] = f.poly().coeff(k);
    }
    return out;
}

cvec sample_points(const cvec& poles, int count, std::uint64_t seed) {
    double radius = 0;
    for (cx a : poles) radius = std::max(radius, std::abs(a));
    radius = 2.0 * (radius + 1.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    cvec out;
    while (static_cast<int>(out.size()) < count) {
        cx z = std::polar(radius, angle(rng));
        bool near = false;
        for (cx a : poles) near = near || std::abs(z - a) < 1e-3;
        if (!near) out.push_back(z);
    }
    return out;
}

}  // namespace laxforge
