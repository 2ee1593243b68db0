#pragma once

#include <functional>

#include "laxforge/ratcalc.hpp"
#include "laxforge/structlin.hpp"

namespace laxforge {

// Flat layout shared by every (Q, .) chart: Q_inf[0..r_inf-4], then Q_fin[s][0..r_s-1].
int chart_size(const PoleProfile& profile);
cvec flatten_Q(const cvec& q_inf, const std::vector<cvec>& q_fin);
void unflatten_Q(const cvec& flat, const PoleProfile& profile, cvec& q_inf, std::vector<cvec>& q_fin);
cvec flatten(const GeoCoords& geo);   // (Q, P)
cvec flatten(const LaxCoords& lax);   // (Q, R)
GeoCoords unflatten_geo(const cvec& flat, const PoleProfile& profile);
LaxCoords unflatten_lax(const cvec& flat, const PoleProfile& profile);
cvec flatten(const OperCoords& oper);  // (q, p)
OperCoords unflatten_oper(const cvec& flat);

// L12 = sum Q_{X,k}(lambda-X)^{-k} + sum Q_{inf,k} lambda^k + omega lambda^{r_inf-3}.
RationalFunction build_L12(const cvec& q_inf, const std::vector<cvec>& q_fin, cx omega, const PoleProfile& profile);

GeoCoords qp_to_geo(const OperCoords& oper, cx omega, const PoleProfile& profile);
// J(i, idx) = dQ_idx / dq_i in the flat Q layout.
cmat jacobian_dQ_dq(const OperCoords& oper, const GeoCoords& geo, cx omega, const PoleProfile& profile);
// q sorted lexicographically by (Re, Im).
OperCoords geo_to_qp(const GeoCoords& geo, cx omega, const PoleProfile& profile);

// g0 fixed by the normalization at infinity for r_inf >= 2 (depends on Q only). For r_inf = 1
// g0 also depends on P and comes from the geometric gauge (see geogauge.hpp).
cx g0_from_Q(const cvec& q_inf, const std::vector<cvec>& q_fin, const PoleProfile& profile, const TimeChart& chart,
             cx omega);

LaxCoords geo_to_lax(const GeoCoords& geo, const PoleProfile& profile, const TimeChart& chart, cx omega, cx g0);
GeoCoords lax_to_geo(const LaxCoords& lax, const PoleProfile& profile, const TimeChart& chart, cx omega, cx g0);

using VectorMap = std::function<cvec(const cvec&)>;

// Fourth-order central differences with step h * max(1, |x_k|).
cmat fd_jacobian(const VectorMap& f, const cvec& x0, double h);
// max |J^T Omega_out J - Omega_in| for a map between (positions, momenta) blocks.
double symplectic_defect(const VectorMap& f, const cvec& x0, double h);

}  // namespace laxforge
