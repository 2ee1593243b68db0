#include "laxforge/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace laxforge {

namespace {

double rel(cx a, cx b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

// C = L11' - L11 L12' / L12 is split as L11' (exact) plus the quotient term.
RationalFunction gauge_term_projected(const GeoLax& lax, const PoleProfile& profile) {
    const RationalFunction num = lax.L11 * lax.L12.derivative();
    RationalFunction out = lax.L11.derivative();
    out -= project_plus(num, lax.L12, 3 - profile.r_inf);
    for (const auto& pole : profile.poles) out -= project_minus(num, lax.L12, pole.x, -pole.r);
    return out;
}

// sum_{j=lo}^{hi} a_j b_{n-j}
cx convolution(const TimeChart& chart, int pole, int n, int lo, int hi) {
    auto t = [&](int k) { return pole < 0 ? chart.inf(k) : chart.fin(pole, k); };
    cx v{};
    for (int j = lo; j <= hi; ++j) v += t(j) * t(n - j);
    return v;
}

struct Block {
    int pole;
    int r;
};

std::vector<Block> relation_blocks(const PoleProfile& profile, bool include_infinity) {
    std::vector<Block> out;
    if (include_infinity && profile.r_inf >= 4) out.push_back({-1, profile.r_inf});
    for (int s = 0; s < profile.n(); ++s)
        if (profile.poles[s].r >= 2) out.push_back({s, profile.poles[s].r});
    return out;
}

// H-vector and corrections of one block, top row first.
void block_vectors(const GeoLax& lax, const CoeffMap& H, const TimeChart& chart, const PoleProfile& profile,
                   const Block& b, cvec& hvec, cvec& corr) {
    const int m = b.pole < 0 ? b.r - 3 : b.r - 1;
    hvec.assign(m, cx{});
    corr.assign(m, cx{});
    for (int a = 0; a < m; ++a) {
        if (b.pole < 0) {
            const int k = b.r - 4 - a;
            hvec[a] = coeff_at(H, -1, k);
            corr[a] = convolution(chart, -1, k + 2, 0, k + 2) + gauge_term_coeff(lax, profile, -1, k);
        } else {
            const int k = b.r - a;
            hvec[a] = coeff_at(H, b.pole, k);
            corr[a] = convolution(chart, b.pole, k - 2, 0, k - 2) + gauge_term_coeff(lax, profile, b.pole, k);
        }
    }
}

}  // namespace

DetForms det_geo_L(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile, const CoeffMap* H) {
    DetForms out;
    out.exact = lax.L11 * lax.L22 - lax.L12 * lax.L21;

    const CoeffMap own = H ? CoeffMap{} : residue_H(lax, chart, profile);
    const CoeffMap& h = H ? *H : own;
    const int ri = profile.r_inf;
    RationalFunction p = build_tdP2(chart, profile);
    for (int k = 0; k <= ri - 4; ++k) p.add_poly_term(k, -coeff_at(h, -1, k));
    for (int s = 0; s < profile.n(); ++s)
        for (int k = 1; k <= profile.poles[s].r; ++k) p.add_pole_term(profile.poles[s].x, k, -coeff_at(h, s, k));
    if (ri >= 3) p.add_poly_term(ri - 3, chart.inf(ri - 1));
    out.projected = p + gauge_term_projected(lax, profile);
    return out;
}

cvec series_sqrt(const cvec& a, int n, cx root) {
    if (a.empty() || a[0] == cx{}) throw DegenerateConfiguration("series_sqrt: zero constant term");
    cvec b(n, cx{});
    if (n == 0) return b;
    b[0] = root;
    for (int k = 1; k < n; ++k) {
        cx v = k < static_cast<int>(a.size()) ? a[k] : cx{};
        for (int i = 1; i < k; ++i) v -= b[i] * b[k - i];
        b[k] = v / (2.0 * root);
    }
    return b;
}

SpectralInvariants spectral_from_det(const RationalFunction& minus_det, const TimeChart& chart,
                                     const PoleProfile& profile) {
    SpectralInvariants out;
    auto expand = [&](int pole, const ExtendedPoint& at, int r, int lead_order, cx expected) {
        // lambda_+ has 2r - 1 coefficients from its leading order on.
        const LaurentSlice sl = minus_det.laurent(at, 2 * lead_order, 2 * lead_order + 2 * r - 2);
        if (std::abs(sl.coeffs[0]) <= 1e-300) throw DegenerateConfiguration("lambda_+ branch: vanishing leading coefficient");
        cx root = std::sqrt(sl.coeffs[0]);
        if (std::abs(-root - expected) < std::abs(root - expected)) root = -root;
        const cvec b = series_sqrt(sl.coeffs, 2 * r - 1, root);
        const double sign = pole < 0 ? 1.0 : -1.0;
        for (int j = 0; j <= r - 1; ++j) out.recovered_times[{pole, j}] = sign * b[r - 1 - j];
        for (int j = 1; j <= r - 1; ++j) out.I[{pole, j}] = sign * b[r - 1 + j] / static_cast<double>(j);
    };
    const int ri = profile.r_inf;
    // At infinity order k multiplies lambda^{-k}: the leading term lambda^{r-2} has order 2 - r.
    expand(-1, ExtendedPoint::inf(), ri, 2 - ri, chart.inf(ri - 1));
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        expand(s, ExtendedPoint::at(profile.poles[s].x), r, -r, -chart.fin(s, r - 1));
    }
    return out;
}

SpectralInvariants spectral_invariants(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile) {
    return spectral_from_det(lax.L12 * lax.L21 - lax.L11 * lax.L22, chart, profile);
}

double max_residual(const std::vector<Discrepancy>& d) {
    double m = 0;
    for (const auto& x : d) m = std::max(m, x.residual);
    return m;
}

std::vector<Discrepancy> det_windows(const RationalFunction& det, const TimeChart& chart, const PoleProfile& profile) {
    std::vector<Discrepancy> out;
    const int ri = profile.r_inf;
    const LaurentSlice inf = det.laurent(ExtendedPoint::inf(), 4 - 2 * ri, 3 - ri);
    for (int k = ri - 3; k <= 2 * ri - 4; ++k) {
        const cx want = -convolution(chart, -1, k + 2, k + 3 - ri, ri - 1);
        const cx got = inf.at(-k);
        out.push_back({"det[lambda^" + std::to_string(k) + "]", got, want, rel(got, want)});
    }
    for (int s = 0; s < profile.n(); ++s) {
        const int r = profile.poles[s].r;
        const LaurentSlice sl = det.laurent(ExtendedPoint::at(profile.poles[s].x), -2 * r, -r - 1);
        for (int k = r + 1; k <= 2 * r; ++k) {
            const cx want = -convolution(chart, s, k - 2, k - r - 1, r - 1);
            const cx got = sl.at(-k);
            out.push_back({"det[(lambda-X" + std::to_string(s + 1) + ")^-" + std::to_string(k) + "]", got, want,
                           rel(got, want)});
        }
    }
    return out;
}

cx gauge_term_coeff(const GeoLax& lax, const PoleProfile& profile, int pole, int k) {
    const RationalFunction num = lax.L11 * lax.L12.derivative();
    const RationalFunction d11 = lax.L11.derivative();
    if (pole < 0) {
        const auto inf = ExtendedPoint::inf();
        return d11.laurent(inf, -k, -k).at(-k) -
               laurent_quotient(num, lax.L12, inf, 3 - profile.r_inf, -k, -k).at(-k);
    }
    const auto at = ExtendedPoint::at(profile.poles[pole].x);
    return d11.laurent(at, -k, -k).at(-k) -
           laurent_quotient(num, lax.L12, at, -profile.poles[pole].r, -k, -k).at(-k);
}

std::vector<Discrepancy> h_vs_invariants(const GeoLax& lax, const CoeffMap& H, const TimeChart& chart,
                                         const PoleProfile& profile, bool include_infinity) {
    const SpectralInvariants si = spectral_invariants(lax, chart, profile);
    std::vector<Discrepancy> out;
    for (const Block& b : relation_blocks(profile, include_infinity)) {
        cvec hvec, corr;
        block_vectors(lax, H, chart, profile, b, hvec, corr);
        const int m = static_cast<int>(hvec.size());
        cvec y(m);
        for (int i = 1; i <= m; ++i) y[i - 1] = 2.0 * static_cast<double>(i) * si.I.at({b.pole, i});
        const cvec lhs = toeplitz_from_times(chart, profile, b.pole).apply(y);
        for (int a = 0; a < m; ++a) {
            const int k = b.pole < 0 ? b.r - 4 - a : b.r - a;
            const cx rhs = hvec[a] - corr[a];
            out.push_back({"H" + to_string(TimeKey{b.pole, k}), lhs[a], rhs, rel(lhs[a], rhs)});
        }
    }
    return out;
}

std::map<TimeKey, cx> spectral_gap(const GeoLax& lax, const TimeChart& chart, const PoleProfile& profile) {
    std::map<TimeKey, cx> out;
    for (const Block& b : relation_blocks(profile, true)) {
        cvec hvec, corr;
        block_vectors(lax, {}, chart, profile, b, hvec, corr);
        const cvec x = toeplitz_solve(toeplitz_from_times(chart, profile, b.pole), corr);
        for (int k = 1; k <= static_cast<int>(x.size()); ++k) out[{b.pole, k}] = x[k - 1] / static_cast<double>(k);
    }
    return out;
}

std::vector<Discrepancy> ham_vs_invariants(const GeoLax& lax, const std::map<TimeKey, cx>& ham,
                                           const TimeChart& chart, const PoleProfile& profile,
                                           bool include_infinity) {
    const SpectralInvariants si = spectral_invariants(lax, chart, profile);
    const auto gap = spectral_gap(lax, chart, profile);
    std::vector<Discrepancy> out;
    for (const auto& [key, g] : gap) {
        if (key.pole < 0 && !include_infinity) continue;
        auto it = ham.find(key);
        if (it == ham.end()) continue;
        const double k = key.k;
        const cx lhs = k * it->second;
        const cx rhs = 2.0 * k * si.I.at(key) + k * g;
        out.push_back({"Ham" + to_string(key), lhs, rhs, rel(lhs, rhs)});
    }
    return out;
}

}  // namespace laxforge
