#pragma once

#include <map>
#include <utility>

#include <Eigen/Dense>

#include "laxforge/coords.hpp"

namespace laxforge {

using Mat2 = Eigen::Matrix2cd;

// (pole, k) -> coefficient; pole -1 is infinity.
using CoeffMap = std::map<std::pair<int, int>, cx>;

inline cx coeff_at(const CoeffMap& m, int pole, int k) {
    auto it = m.find({pole, k});
    return it == m.end() ? cx{} : it->second;
}

// P~2 = sum P_{inf,j} lambda^j + sum_s sum_j P_{X_s,j} (lambda-X_s)^{-j}.
RationalFunction build_tdP2(const TimeChart& chart, const PoleProfile& profile);

struct HSolution {
    CoeffMap H;  // H_{inf,k}, k = 0..r_inf-4; H_{X_s,k}, k = 1..r_s
    cx g0{};
    double cond = 1.0;
};

// Interpolation system for H at the apparent singularities, augmented by the relations at
// infinity when r_inf <= 2.
HSolution solve_H(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile);

struct OperLax {
    RationalFunction L21, L22, tdP2;
    CoeffMap H;
    cx g0{};

    Mat2 at(cx lambda) const;
};

// Every H coefficient is scaled by 1 + h_fault (fault injection only).
OperLax build_oper_L(const OperCoords& oper, const TimeChart& chart, const PoleProfile& profile, cx h_fault = 0.0);

// nu_{X_s,k} for k = 0..r_s-1 and nu_{inf,k} for k = 1..r_inf-3. The coefficients nu_{inf,0}
// and nu_{inf,-1} (r_inf <= 2) are unknowns of the mu system; see build_oper_A.
CoeffMap nu_coeffs(const DeformationVector& alpha, const TimeChart& chart, const PoleProfile& profile);

struct OperDeformation {
    RationalFunction A11, A12, A21, A22;
    CoeffMap nu;
    cvec mu;
    cx c_inf0{};

    Mat2 at(cx lambda) const;
};

// dlog_omega = L_alpha[omega] / omega; it only shifts A by a multiple of the identity.
// nu_fault scales every nu_{p,k} by 1 + nu_fault (fault injection only).
OperDeformation build_oper_A(const DeformationVector& alpha, const OperCoords& oper, const OperLax& lax,
                             const TimeChart& chart, const PoleProfile& profile, cx dlog_omega = 0.0,
                             cx nu_fault = 0.0);

// Ham for each deformable time (irregular times k >= 1 and positions).
std::map<TimeKey, cx> hamiltonians_oper(const CoeffMap& H, const TimeChart& chart, const PoleProfile& profile);

// sum_k alpha_k Ham^{(k)} at (q, p, t).
cx hamiltonian_along(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                     const PoleProfile& profile);

// (dq/dtau, dp/dtau) from Hamilton's equations, gradients by fourth-order central differences.
OperCoords hamilton_velocity(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                             const PoleProfile& profile, double h = 1e-4);

struct CompatOptions {
    double h = 1e-6;
    int samples = 20;
    std::uint64_t seed = 7;
    cx h_fault{};   // relative perturbation of every H coefficient in L (negative control)
    cx nu_fault{};  // relative perturbation of the nu entering A
};

// max over sample lambda of the entrywise |L_alpha[L] - d_lambda A + [L, A]| / (1 + largest
// entry of the four terms), with L_alpha[L] taken by central differences along the combined
// time shift and Hamilton flow. The step is capped so the stride along the flow stays <= 1e-3.
double compatibility_residual(const DeformationVector& alpha, const OperCoords& oper, const TimeChart& chart,
                              const PoleProfile& profile, const CompatOptions& opt = {});

}  // namespace laxforge
