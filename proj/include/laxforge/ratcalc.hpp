#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "laxforge/model.hpp"

namespace laxforge {

// Ascending coefficients in lambda.
class Poly {
public:
    Poly() = default;
    explicit Poly(cvec coeffs);
    static Poly constant(cx c);
    static Poly monomial(int degree, cx c = 1.0);
    static Poly from_roots(const cvec& roots, cx lead = 1.0);

    const cvec& coeffs() const { return c_; }
    int degree() const { return static_cast<int>(c_.size()) - 1; }  // -1 for zero
    bool is_zero() const { return c_.empty(); }
    cx coeff(int k) const { return k >= 0 && k <= degree() ? c_[k] : cx{}; }
    cx leading() const { return c_.empty() ? cx{} : c_.back(); }

    cx operator()(cx x) const;
    Poly derivative() const;
    // Coefficients of p(a + x) in powers of x.
    cvec taylor_at(cx a) const;

    Poly& operator+=(const Poly& o);
    Poly& operator-=(const Poly& o);
    Poly& operator*=(cx s);
    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator*(Poly a, cx s) { return a *= s; }
    friend Poly operator*(cx s, Poly a) { return a *= s; }
    friend Poly operator*(const Poly& a, const Poly& b);

private:
    void trim();
    cvec c_;
};

// Laurent coefficients at a point. At a finite point order k multiplies (lambda-a)^k; at
// infinity order k multiplies lambda^{-k}.
struct LaurentSlice {
    ExtendedPoint point;
    int k_lo = 0;
    cvec coeffs;

    int k_hi() const { return k_lo + static_cast<int>(coeffs.size()) - 1; }
    cx at(int k) const {
        int i = k - k_lo;
        return i >= 0 && i < static_cast<int>(coeffs.size()) ? coeffs[i] : cx{};
    }
};

// Truncated power series helpers (coefficient 0 is the constant term).
cvec series_mul(const cvec& a, const cvec& b, int n);
cvec series_inv(const cvec& a, int n);
cvec series_div(const cvec& a, const cvec& b, int n);

// Rational function with poles at explicitly known points, stored in partial-fraction form:
//   f = poly(lambda) + sum_a sum_k c_{a,k} (lambda - a)^{-k}.
// Products and derivatives stay exact in this form; num()/den() expand on demand with a
// monic denominator.
class RationalFunction {
public:
    struct PrincipalPart {
        cx at;
        cvec c;  // c[k-1] multiplies (lambda-at)^{-k}
    };

    RationalFunction() = default;
    RationalFunction(Poly p);  // NOLINT implicit: polynomials are rational functions
    static RationalFunction constant(cx c);
    static RationalFunction pole(cx at, int order, cx coeff = 1.0);
    // num / prod (lambda - root)^mult
    static RationalFunction from_factored(const Poly& num, const std::vector<std::pair<cx, int>>& den);
    // Factors den by companion eigenvalues, clustering roots closer than cluster_tol.
    static RationalFunction from_num_den(const Poly& num, const Poly& den, double cluster_tol = 1e-4);

    const Poly& poly() const { return poly_; }
    const std::vector<PrincipalPart>& parts() const { return parts_; }
    int pole_order(cx a) const;
    int degree_at_infinity() const { return poly_.degree(); }

    Poly num() const;
    Poly den() const;

    cx operator()(cx x) const;
    RationalFunction derivative() const;

    RationalFunction& operator+=(const RationalFunction& o);
    RationalFunction& operator-=(const RationalFunction& o);
    RationalFunction& operator*=(cx s);
    RationalFunction operator-() const;
    friend RationalFunction operator+(RationalFunction a, const RationalFunction& b) { return a += b; }
    friend RationalFunction operator-(RationalFunction a, const RationalFunction& b) { return a -= b; }
    friend RationalFunction operator*(RationalFunction a, cx s) { return a *= s; }
    friend RationalFunction operator*(cx s, RationalFunction a) { return a *= s; }
    friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);

    // Add c (lambda - a)^{-k}.
    void add_pole_term(cx a, int k, cx c);
    void add_poly_term(int k, cx c);

    LaurentSlice laurent(const ExtendedPoint& a, int k_lo, int k_hi) const;

private:
    PrincipalPart* find(cx a);
    const PrincipalPart* find(cx a) const;

    Poly poly_;
    std::vector<PrincipalPart> parts_;
};

LaurentSlice laurent_slice(const RationalFunction& f, const ExtendedPoint& a, int k_lo, int k_hi);
RationalFunction singular_part(const RationalFunction& f, cx a);
Poly polynomial_part_at_infinity(const RationalFunction& f);

// Laurent slice of f/g at a, assuming g = O(z^{g_order}) there with a nonzero coefficient at
// that order (z = lambda - a, or 1/lambda at infinity). Any window is allowed; the division
// starts at the leading order of f.
LaurentSlice laurent_quotient(const RationalFunction& f, const RationalFunction& g, const ExtendedPoint& a,
                              int g_order, int k_lo, int k_hi);
// Rational function built from a slice: the negative orders at a finite point, or the
// non-positive orders (polynomial part) at infinity.
RationalFunction singular_from_slice(const LaurentSlice& s);

struct PartialFractions {
    std::map<std::pair<int, int>, cx> coeff;  // (pole, k): pole -1 is lambda^k, pole s is (lambda-X_s)^{-k}
    cx get(int pole, int k) const {
        auto it = coeff.find({pole, k});
        return it == coeff.end() ? cx{} : it->second;
    }
};

// Throws ChartError on poles outside the profile or above the declared orders.
PartialFractions partial_fractions(const RationalFunction& f, const PoleProfile& profile, double tol = 1e-10);

bool same_point(cx a, cx b);

// Pointwise-check sample points: uniform on the circle of radius 2(max|pole| + 1), rejecting
// points within 1e-3 of a pole.
cvec sample_points(const cvec& poles, int count, std::uint64_t seed);

}  // namespace laxforge
