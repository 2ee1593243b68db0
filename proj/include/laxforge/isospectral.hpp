#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "laxforge/geogauge.hpp"

namespace laxforge {

// Exact fraction with a positive denominator.
struct Rational {
    long long num = 0, den = 1;

    Rational() = default;
    Rational(long long n, long long d = 1);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }
    auto operator<=>(const Rational& o) const { return num * o.den <=> o.num * den; }
    bool operator==(const Rational& o) const = default;
};

Rational operator+(Rational a, Rational b);
Rational operator-(Rational a, Rational b);
Rational operator*(Rational a, Rational b);
Rational operator/(Rational a, Rational b);

// Sum of c * prod_i z_i^{e_i} with rational coefficients and exponents.
class MonoSum {
public:
    using Exponents = std::vector<Rational>;

    MonoSum() = default;
    explicit MonoSum(int vars) : vars_(vars) {}
    static MonoSum constant(int vars, Rational c);
    static MonoSum power(int vars, int var, Rational e);

    int vars() const { return vars_; }
    const std::map<Exponents, Rational>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    void add(const Exponents& e, Rational c);
    MonoSum derivative(int var) const;
    MonoSum times_var(int var) const;
    MonoSum scaled(Rational c) const;
    MonoSum& operator+=(const MonoSum& o);
    MonoSum& operator-=(const MonoSum& o);

    // Principal branch for fractional exponents, exact integer powers otherwise.
    cx operator()(const cvec& z) const;
    std::string str(const std::vector<std::string>& names) const;

private:
    int vars_ = 0;
    std::map<Exponents, Rational> terms_;
};

// Lower-triangular matrix of time-dependent entries, F[i][j] for j <= i.
struct ProfileMatrix {
    enum class Kind { finite, infinity_Q, infinity_R };

    Kind kind = Kind::finite;
    ExtendedPoint pole;
    int pole_index = -1;
    int r = 0;                  // order of the pole
    std::vector<TimeKey> vars;  // the time behind each symbolic variable
    std::vector<std::vector<MonoSum>> F;
    std::vector<MonoSum> shift;  // infinity_R only: -(t_{inf,r-3}, ..., t_{inf,1})

    int size() const { return static_cast<int>(F.size()); }
    cvec var_values(const TimeChart& chart) const;
    cmat evaluate(const TimeChart& chart) const;
    cvec evaluate_shift(const TimeChart& chart) const;
};

// Rows (Q_{X,r}, ..., Q_{X,2}) against (u_{X,r}, ..., u_{X,2}). Throws DegenerateConfiguration
// when t_{X,r-1} = 0 and ChartError when t_{X,r-1} sits on the branch cut (r >= 3).
ProfileMatrix solve_profile_finite(const PoleProfile& profile, int s, const TimeChart& chart);
// Rows (omega, Q_{inf,r-4}, ..., Q_{inf,0}) / omega against (1, u_{inf,r-4}, ..., u_{inf,0}).
// Throws NormalizationConflict when t_{inf,r-1} != 1 or t_{inf,r-2} != 0; requires r_inf >= 4.
ProfileMatrix solve_profile_infinity(const PoleProfile& profile, const TimeChart& chart);

struct RProfiles {
    std::vector<ProfileMatrix> finite;  // one per pole with r_s >= 2, same matrices as for Q
    std::vector<int> finite_pole;       // pole index of each entry
    bool has_infinity = false;
    ProfileMatrix infinity;             // rows (R_{inf,r-4}, ..., R_{inf,0}) for r_inf >= 4
};
RProfiles solve_R_profiles(const PoleProfile& profile, const TimeChart& chart);

// Adds eps * z_0^2 to every entry on and below the diagonal (fault injection only). Matrices
// without variables are returned unchanged.
ProfileMatrix perturb_profile(const ProfileMatrix& pm, Rational eps);

// u and v share the index sets of Q and R: u_inf[k] = u_{inf,k}, u_fin[s][k-1] = u_{X_s,k}.
struct IsoCoords {
    cvec u_inf, v_inf;
    std::vector<cvec> u_fin, v_fin;
    cx omega{1.0};  // used for r_inf >= 2; omega(t) is derived for r_inf = 1
};

// omega(t) for r_inf = 1 (ChartError when sum u_{X,1} != 0 beyond tol); iso.omega otherwise.
cx omega_profile(const IsoCoords& iso, const TimeChart& chart, const PoleProfile& profile, double tol = 1e-9);

struct IsoLax {
    LaxCoords lax;
    cx omega{1.0};
};

// f_fault != 0 replaces every profile matrix by perturb_profile(F, f_fault).
IsoLax iso_to_lax(const IsoCoords& iso, const TimeChart& chart, const PoleProfile& profile, Rational f_fault = {});
IsoCoords lax_to_iso(const LaxCoords& lax, const TimeChart& chart, const PoleProfile& profile, cx omega);

// Central differences of the profile columns substituted into the defining system; max
// entry residual scaled by 1 + the largest right-hand side entry.
double ode_residual(const ProfileMatrix& pm, const TimeChart& chart, double h = 1e-5);

struct IsoOptions {
    double h = 1e-3;  // fourth-order stencil
    int samples = 20;
    std::uint64_t seed = 7;
    Rational f_fault{};  // see iso_to_lax
    cx nu_fault{};       // see GeoAOptions
};

// max over sample lambda of |delta_t L~ - d_lambda A~| / (1 + largest entry), with delta_t by
// central differences at fixed (u, v) along alpha, positions included.
double isospectral_residual(const IsoCoords& iso, const DeformationVector& alpha, const TimeChart& chart,
                            const PoleProfile& profile, const IsoOptions& opt = {});

// Same residual with (Q, R) held fixed while the times move (negative control).
double frozen_chart_residual(const LaxCoords& lax, cx omega, const DeformationVector& alpha, const TimeChart& chart,
                             const PoleProfile& profile, const IsoOptions& opt = {});

// Time-dependent change (q, p) -> (u, v): X = d(q, p)/dt_key at fixed (u, v) must be the
// Hamiltonian field of Ham_key - w I_key with w = 2, Ham from the geometric residues.
// Returns max |X - (dK/dp, -dK/dq)| / (1 + |X|).
double iso_hamiltonian_defect(const IsoCoords& iso, TimeKey key, const TimeChart& chart, const PoleProfile& profile,
                              double h = 1e-4, double invariant_weight = 2.0, Rational f_fault = {});

}  // namespace laxforge
