#pragma once

#include <vector>

#include "laxforge/opergauge.hpp"

namespace laxforge {

struct GeoLax {
    RationalFunction L11, L12, L21, L22;
    RationalFunction mathring_L11;  // L11 + (t_{inf,0} lambda + g0) L12 / omega; r_inf = 1 only
    cx g0{};
    cx omega{1.0};
    // Subleading normalization coefficients at infinity, read off the built matrix:
    // beta = [lambda^{r_inf-3}] L11, delta = [lambda^{r_inf-3}] L21.
    cx beta{}, delta{};

    Mat2 at(cx lambda) const;
};

// [f / g]_{X,-} where g has Laurent order g_order (< 0) at X.
RationalFunction project_minus(const RationalFunction& f, const RationalFunction& g, cx X, int g_order);
// [f / g]_{inf,+} where g = O(lambda^{-g_order}) at infinity.
RationalFunction project_plus(const RationalFunction& f, const RationalFunction& g, int g_order);

// sum_{j=r_s+1}^{2r_s} (sum_m t_{r_s-1-m} t_{j+m-r_s-1}) (lambda-X_s)^{-j}
RationalFunction times_square_fin(const TimeChart& chart, const PoleProfile& profile, int s);
// sum_{j=r_inf-3}^{2r_inf-4} (sum_m t_{r_inf-1-m} t_{j+m-r_inf+3}) lambda^j  (r_inf >= 3)
RationalFunction times_square_inf(const TimeChart& chart, const PoleProfile& profile);

// sum_s X_s^2 Q_{X_s,1} + 2 X_s Q_{X_s,2} + Q_{X_s,3}
cx third_moment(const std::vector<cvec>& q_fin, const PoleProfile& profile);

// Residue formula for g0 at r_inf = 1 (needs only mathring L11, L12 and the times).
cx g0_ring(const RationalFunction& ring, const RationalFunction& L12, const std::vector<cvec>& q_fin,
           const TimeChart& chart, const PoleProfile& profile, cx omega);

// L21 through mathring L11 (r_inf = 1), pointwise and as a Laurent slice at infinity.
cx super_L21_at(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile, cx lambda);

// Throws ChartError when the chart constraints fail beyond tol (relative to 1 + |omega|).
GeoLax build_geo_L_QP(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile, cx omega,
                      double tol = 1e-8);
GeoLax build_geo_L_QR(const LaxCoords& lax, const TimeChart& chart, const PoleProfile& profile, cx omega,
                      double tol = 1e-8);

// g0 for the (Q,P) chart: the closed forms for r_inf >= 2, the residue formula for r_inf = 1.
cx geo_g0(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile, cx omega);

struct GeoDeformation {
    RationalFunction A11, A12, A21, A22;
    CoeffMap nu_ext;  // nu plus nu_{inf,r_inf-2}, nu_{inf,r_inf-1} (r_inf >= 3) or nu_{inf,0}, nu_{inf,-1}

    Mat2 at(cx lambda) const;
};

// Extends nu by the Q-dependent coefficients: nu_{inf,r_inf-2}, nu_{inf,r_inf-1} for r_inf >= 3,
// nu_{inf,0} (and nu_{inf,-1}) from the extra conditions for r_inf <= 2.
CoeffMap extend_nu(const CoeffMap& nu, const cvec& q_inf, const std::vector<cvec>& q_fin, const PoleProfile& profile,
                   cx omega);

// Residuals of the extra conditions on nu_{inf,0}, nu_{inf,-1} (empty for r_inf >= 3).
std::vector<ConstraintViolation> extra_condition_residuals(const CoeffMap& nu, const std::vector<cvec>& q_fin,
                                                           const PoleProfile& profile, cx omega);

// L_alpha[omega]: -omega nu_{inf,-1} for r_inf = 1, zero otherwise.
cx lie_omega(const CoeffMap& nu_ext, const PoleProfile& profile, cx omega);

struct GeoAOptions {
    cx L_omega{};
    // When set, these nu (e.g. from the oper-gauge solve) are used instead of solving the extra
    // conditions, and a violation beyond tol throws ChartError.
    const CoeffMap* nu = nullptr;
    double tol = 1e-8;
    cx nu_fault{};  // scales the time-direction nu by 1 + nu_fault (fault injection only)
};

// A11 from the (Q,P) display.
GeoDeformation build_geo_A(const DeformationVector& alpha, const GeoCoords& geo, const TimeChart& chart,
                           const PoleProfile& profile, cx omega, const GeoAOptions& opt = {});
// A11 from the (Q,R) display.
GeoDeformation build_geo_A(const DeformationVector& alpha, const LaxCoords& lax, const TimeChart& chart,
                           const PoleProfile& profile, cx omega, const GeoAOptions& opt = {});

// H_{p,k} as residues of L11^2 + L21 L12 + L12 d(L11/L12). With use_ring (r_inf = 1) the
// bracket is replaced by the mathring L11 expression.
CoeffMap residue_H(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile, bool use_ring = false);

std::map<TimeKey, cx> hamiltonians_geo(const GeoCoords& geo, const TimeChart& chart, const PoleProfile& profile,
                                       cx omega, bool use_ring = false);

// The oper gauge G = [[1, 0], [L11, L12]] built directly from (q, p).
struct OperGaugeMatrix {
    RationalFunction G21, G22;

    Mat2 at(cx lambda) const;
    Mat2 dlambda(cx lambda) const;
};

OperGaugeMatrix build_gauge(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile, cx omega,
                            cx g0);

// G^{-1} L G - G^{-1} d_lambda G at lambda.
Mat2 gauge_L(const OperLax& L, const OperGaugeMatrix& G, cx lambda);

// G^{-1} A G - G^{-1} L_alpha[G] at each point, with L_alpha[G] by fourth-order differences
// along the time shift, the Hamilton flow of (q, p) and (r_inf = 1) the omega drift.
std::vector<Mat2> gauge_A(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                          const PoleProfile& profile, cx omega, const cvec& points, double h = 1e-4);

// max entry |a - b| / (1 + max entry |b|)
double relative_defect(const Mat2& a, const Mat2& b);

}  // namespace laxforge
