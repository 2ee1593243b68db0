#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "laxforge/instance.hpp"
#include "laxforge/spectral.hpp"

using namespace laxforge;

namespace {

const std::vector<Case> kCases = {{4, {}},     {5, {}},     {6, {}},    {3, {2}},   {3, {1, 1}},
                                  {2, {2}},    {2, {1, 2}}, {2, {3}},   {1, {3}},   {1, {2, 2}},
                                  {1, {1, 2}}, {5, {1, 2}}, {4, {3}},   {3, {4}},   {1, {1, 1, 2}}};

GeoLax geo_lax(const Instance& in) { return build_geo_L_QP(in.geo, in.chart, in.profile, in.omega); }

cvec points_for(const Instance& in, int count) {
    cvec poles = in.oper.q;
    for (const auto& p : in.profile.poles) poles.push_back(p.x);
    return sample_points(poles, count, 11);
}

}  // namespace

TEST_CASE("series_sqrt squares back and fails on a zero constant") {
    const cvec a = {cx(4, 1), cx(0.5, -2), cx(3, 0), cx(-1, 1), cx(0.2, 0.1)};
    const cvec b = series_sqrt(a, 5, std::sqrt(a[0]));
    const cvec sq = series_mul(b, b, 5);
    for (int k = 0; k < 5; ++k) CHECK(std::abs(sq[k] - a[k]) < 1e-13);
    CHECK_THROWS_AS(series_sqrt({cx{}, 1.0}, 2, 0.0), DegenerateConfiguration);
}

TEST_CASE("exact and projected det L~ agree pointwise") {
    for (const auto& c : kCases)
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CAPTURE(c.name());
            CAPTURE(seed);
            const Instance in = generate_instance(c, seed);
            const GeoLax lax = geo_lax(in);
            const OperLax oper = build_oper_L(in.oper, in.chart, in.profile);
            const DetForms d = det_geo_L(lax, in.chart, in.profile, &oper.H);
            const DetForms self = det_geo_L(lax, in.chart, in.profile);
            for (cx z : points_for(in, 20)) {
                const cx e = d.exact(z);
                CHECK(std::abs(d.projected(z) - e) / (1.0 + std::abs(e)) < 1e-9);
                CHECK(std::abs(self.projected(z) - e) / (1.0 + std::abs(e)) < 1e-9);
                // det L~ = -L21 + L12 d(L11/L12) with the oper L21
                const cx ratio_d = (lax.L11.derivative()(z) * lax.L12(z) - lax.L11(z) * lax.L12.derivative()(z)) /
                                   lax.L12(z);
                const cx via_oper = -oper.L21(z) + ratio_d;
                CHECK(std::abs(via_oper - e) / (1.0 + std::abs(e)) < 1e-8);
            }
        }
}

TEST_CASE("leading coefficients of det L~") {
    for (const auto& c : kCases) {
        CAPTURE(c.name());
        const Instance in = generate_instance(c, 4);
        const RationalFunction det = det_geo_L(geo_lax(in), in.chart, in.profile).exact;
        const int ri = in.profile.r_inf;
        if (ri >= 3) {
            const cx lead = det.laurent(ExtendedPoint::inf(), 4 - 2 * ri, 4 - 2 * ri).at(4 - 2 * ri);
            CHECK(std::abs(lead + in.chart.inf(ri - 1) * in.chart.inf(ri - 1)) < 1e-10);
        }
        for (int s = 0; s < in.profile.n(); ++s) {
            const int r = in.profile.poles[s].r;
            const cx t = in.chart.fin(s, r - 1);
            const cx lead = det.laurent(ExtendedPoint::at(in.profile.poles[s].x), -2 * r, -2 * r).at(-2 * r);
            CHECK(std::abs(lead + t * t) / (1.0 + std::abs(t * t)) < 1e-10);
        }
    }
}

TEST_CASE("det windows reproduce the time convolutions") {
    for (const auto& c : kCases)
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CAPTURE(c.name());
            const Instance in = generate_instance(c, seed);
            const auto w = det_windows(det_geo_L(geo_lax(in), in.chart, in.profile).exact, in.chart, in.profile);
            CHECK(max_residual(w) < 1e-9);
        }
}

TEST_CASE("special coefficients at infinity for r_inf = 1, 2") {
    for (const auto& c : std::vector<Case>{{2, {2}}, {2, {1, 2}}, {1, {3}}, {1, {2, 2}}}) {
        CAPTURE(c.name());
        const Instance in = generate_instance(c, 9);
        const RationalFunction det = det_geo_L(geo_lax(in), in.chart, in.profile).exact;
        const LaurentSlice sl = det.laurent(ExtendedPoint::inf(), 0, 2);
        const cx t0 = in.chart.inf(0);
        if (c.r_inf == 2) {
            const cx want = -2.0 * in.chart.inf(1) * t0;
            CHECK(std::abs(sl.at(1) - want) / (1.0 + std::abs(want)) < 1e-9);
        } else {
            CHECK(std::abs(sl.at(0)) < 1e-9);
            CHECK(std::abs(sl.at(1)) < 1e-9);
            CHECK(std::abs(sl.at(2) + t0 * t0) / (1.0 + std::abs(t0 * t0)) < 1e-9);
        }
    }
}

TEST_CASE("lambda_+ squares to -det and recovers the times") {
    for (const auto& c : kCases)
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CAPTURE(c.name());
            CAPTURE(seed);
            const Instance in = generate_instance(c, seed);
            const GeoLax lax = geo_lax(in);
            const SpectralInvariants si = spectral_invariants(lax, in.chart, in.profile);
            for (const auto& [key, v] : si.recovered_times) {
                CAPTURE(to_string(key));
                const cx want = key.pole < 0 ? in.chart.inf(key.k) : in.chart.fin(key.pole, key.k);
                CHECK(std::abs(v - want) / (1.0 + std::abs(want)) < 1e-8);
            }
            // rebuild lambda_+ at infinity from t and I and square it
            const int ri = in.profile.r_inf;
            cvec b(2 * ri - 1);
            for (int j = 0; j < ri; ++j) b[ri - 1 - j] = in.chart.inf(j);
            for (int j = 1; j < ri; ++j) b[ri - 1 + j] = static_cast<double>(j) * si.I.at({-1, j});
            const cvec sq = series_mul(b, b, 2 * ri - 1);
            const RationalFunction minus_det = lax.L12 * lax.L21 - lax.L11 * lax.L22;
            const LaurentSlice sl = minus_det.laurent(ExtendedPoint::inf(), 4 - 2 * ri, 2);
            for (int i = 0; i < 2 * ri - 1; ++i)
                CHECK(std::abs(sq[i] - sl.at(4 - 2 * ri + i)) / (1.0 + std::abs(sq[i])) < 1e-9);
        }
}

TEST_CASE("a constant square has vanishing invariants") {
    // lambda_+ = c at a bare r_inf = 2 pole: t_{inf,1} = c, t_{inf,0} = 0, I = 0
    const cx c(1.5, -0.5);
    PoleProfile prof{2, {}};
    TimeChart chart;
    chart.t_inf = {0.0, c};
    const SpectralInvariants si = spectral_from_det(RationalFunction::constant(c * c), chart, prof);
    REQUIRE(si.I.size() == 1);
    CHECK(std::abs(si.I.at({-1, 1})) < 1e-15);
    CHECK(std::abs(si.recovered_times.at({-1, 1}) - c) < 1e-15);
    CHECK(std::abs(si.recovered_times.at({-1, 0})) < 1e-15);
}

TEST_CASE("vanishing leading coefficient is a branch error") {
    PoleProfile prof{2, {{cx(0.5, 0.5), 2}}};
    TimeChart chart;
    chart.t_inf = {0.0, 1.0};
    chart.t_fin = {{0.3, 1.0}};
    RationalFunction f = RationalFunction::constant(1.0);
    f.add_pole_term(prof.poles[0].x, 3, 1.0);  // no (lambda-X)^{-4} term
    CHECK_THROWS_AS(spectral_from_det(f, chart, prof), DegenerateConfiguration);
}

TEST_CASE("H and Ham against the spectral invariants") {
    for (const auto& c : kCases)
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CAPTURE(c.name());
            CAPTURE(seed);
            const Instance in = generate_instance(c, seed);
            const GeoLax lax = geo_lax(in);
            const HSolution H = solve_H(in.oper, in.chart, in.profile);
            const auto hd = h_vs_invariants(lax, H.H, in.chart, in.profile);
            const auto ham = hamiltonians_oper(H.H, in.chart, in.profile);
            const auto md = ham_vs_invariants(lax, ham, in.chart, in.profile);
            for (const auto& d : hd) {
                CAPTURE(d.name);
                CHECK(d.residual < 1e-8);
            }
            for (const auto& d : md) {
                CAPTURE(d.name);
                CHECK(d.residual < 1e-8);
            }
            size_t expected = 0;
            if (c.r_inf >= 4) expected += c.r_inf - 3;
            for (int r : c.orders) expected += r >= 2 ? r - 1 : 0;
            CHECK(hd.size() == expected);
            CHECK(md.size() == expected);
        }
}

TEST_CASE("P = 0 synthetic instance") {
    const Instance in = generate_instance({4, {2}}, 5);
    GeoCoords geo = in.geo;
    for (auto& p : geo.P_inf) p = 0.0;
    for (auto& ps : geo.P_fin)
        for (auto& p : ps) p = 0.0;
    const GeoLax lax = build_geo_L_QP(geo, in.chart, in.profile, in.omega);
    const auto d = h_vs_invariants(lax, residue_H(lax, in.chart, in.profile), in.chart, in.profile);
    CHECK(d.size() == 2);
    for (const auto& x : d) CHECK(x.residual < 1e-8);
}
