#pragma once

#include <string>
#include <vector>

#include "laxforge/geogauge.hpp"

namespace laxforge {

struct DetForms {
    RationalFunction exact;      // L11 L22 - L12 L21
    RationalFunction projected;  // P~2 - H terms + [L12 d(L11/L12)] projected at every pole
};

// With H == nullptr the projected form uses the residue H of the geometric matrix.
DetForms det_geo_L(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile,
                   const CoeffMap* H = nullptr);

// Square root of a power series with b[0] = root, where root^2 = a[0] != 0.
cvec series_sqrt(const cvec& a, int n, cx root);

struct SpectralInvariants {
    std::map<TimeKey, cx> I;               // (pole, k), k = 1..r_p-1
    std::map<TimeKey, cx> recovered_times;  // (pole, k), k = 0..r_p-1
};

// lambda_+ = sqrt(minus_det) expanded at every pole. The branch puts +t_{inf,r-1} (resp.
// -t_{X,r-1}) in front; a vanishing leading coefficient throws DegenerateConfiguration.
SpectralInvariants spectral_from_det(const RationalFunction& minus_det, const TimeChart& chart,
                                     const PoleProfile& profile);
SpectralInvariants spectral_invariants(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile);

struct Discrepancy {
    std::string name;
    cx lhs{}, rhs{};
    double residual = 0;  // |lhs - rhs| / (1 + |rhs|)
};

double max_residual(const std::vector<Discrepancy>& d);

// Coefficients of det L~ against the time convolutions: orders r-3..2r-4 at infinity (all
// r_inf >= 1) and r_s+1..2r_s at each X_s.
std::vector<Discrepancy> det_windows(const RationalFunction& det, const TimeChart& chart, const PoleProfile& profile);

// [lambda^k] C at infinity (pole -1) or [(lambda-X_s)^{-k}] C, for C = L12 d(L11/L12).
cx gauge_term_coeff(const GeoLax& lax, const PoleProfile& profile, int pole, int k);

// 2 M (1 I_1, 2 I_2, ...) = H-vector - corrections, per entry. The infinity block is
// included for r_inf >= 4.
std::vector<Discrepancy> h_vs_invariants(const GeoLax& lax, const CoeffMap& H, const TimeChart& chart,
                                         const PoleProfile& profile, bool include_infinity = true);

// k Ham_k = 2 k I_k + [M^{-1} corrections]_k for every irregular time that has a Hamiltonian.
std::vector<Discrepancy> ham_vs_invariants(const GeoLax& lax, const std::map<TimeKey, cx>& ham,
                                           const TimeChart& chart, const PoleProfile& profile,
                                           bool include_infinity = true);

// [M^{-1} corrections]_k / k: the gap Ham_k - 2 I_k predicted by the relations.
std::map<TimeKey, cx> spectral_gap(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile);

}  // namespace laxforge
