#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "laxforge/structlin.hpp"

using namespace laxforge;

TEST_CASE("toeplitz from times") {
    PoleProfile prof{6, {{0.0, 2}}};
    TimeChart chart = empty_chart(prof);
    chart.t_inf = {0.0, 0.0, 0.0, 2.0, 0.0, 1.0};
    chart.t_fin[0] = {0.0, 7.0};
    auto m = toeplitz_from_times(chart, prof, -1);
    cmat expect(3, 3);
    expect << 1, 0, 0, 0, 1, 0, 2, 0, 1;
    CHECK((m.dense() - expect).norm() == 0);
    cmat inv = m.dense().inverse();
    cmat expect_inv(3, 3);
    expect_inv << 1, 0, 0, 0, 1, 0, -2, 0, 1;
    CHECK((inv - expect_inv).norm() < 1e-14);

    auto mx = toeplitz_from_times(chart, prof, 0);
    REQUIRE(mx.size() == 1);
    CHECK(mx(0, 0) == cx(7.0));

    PoleProfile small{3, {}};
    CHECK(toeplitz_from_times(empty_chart(small), small, -1).size() == 0);
}

TEST_CASE("toeplitz solve") {
    LowerToeplitz id{{1.0, 0.0, 0.0}};
    cvec b{1.0, cx(2, 1), -3.0};
    CHECK(toeplitz_solve(id, b) == b);
    auto x = toeplitz_solve(LowerToeplitz{{1.0, 2.0}}, {1.0, 0.0});
    CHECK(std::abs(x[0] - 1.0) < 1e-15);
    CHECK(std::abs(x[1] + 2.0) < 1e-15);
    auto y = toeplitz_solve(LowerToeplitz{{1.0, 0.0, 2.0}}, {0.0, 0.0, 1.0});
    CHECK(std::abs(y[2] - 1.0) < 1e-15);
    CHECK(std::abs(y[0]) + std::abs(y[1]) == 0);
    CHECK_THROWS_AS(toeplitz_solve(LowerToeplitz{{0.0, 1.0}}, {1.0, 1.0}), SingularMatrix);
}

TEST_CASE("lower Toeplitz matrices commute and solves invert") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
        int m = 1 + trial % 6;
        LowerToeplitz a, b;
        cvec rhs;
        for (int i = 0; i < m; ++i) {
            a.c.push_back({u(rng), u(rng)});
            b.c.push_back({u(rng), u(rng)});
            rhs.push_back({u(rng), u(rng)});
        }
        a.c[0] += 2.0;
        CHECK((a.dense() * b.dense() - b.dense() * a.dense()).norm() < 1e-12);
        CHECK(((a * b).dense() - a.dense() * b.dense()).norm() < 1e-12);
        auto x = toeplitz_solve(a, rhs);
        auto back = a.apply(x);
        double nb = to_eigen(rhs).norm();
        CHECK((to_eigen(back) - to_eigen(rhs)).norm() < 1e-11 * nb);
    }
}

TEST_CASE("vandermonde examples") {
    VandermondeStack one{{2.0}, {{ExtendedPoint::inf(), 1}}};
    auto r1 = vandermonde_solve(one, {5.0}, false);
    CHECK(std::abs(r1.x[0] - 5.0) < 1e-15);

    // Single double pole at 0, nodes (1, 2): transposed rows are the node columns.
    VandermondeStack two{{1.0, 2.0}, {{ExtendedPoint::at(0.0), 2}}};
    cmat vt = two.dense().transpose();
    cmat expect(2, 2);
    expect << 1, 0.5, 1, 0.25;
    CHECK((vt - expect).norm() == 0);
    auto r2 = vandermonde_solve(two, {1.0, 1.0}, true);
    CHECK(std::abs(r2.x[0] - 1.0) < 1e-14);
    CHECK(std::abs(r2.x[1]) < 1e-14);

    auto r0 = vandermonde_solve(two, {0.0, 0.0}, false);
    CHECK(std::abs(r0.x[0]) + std::abs(r0.x[1]) == 0);

    VandermondeStack bad{{1.0, 1.0}, {{ExtendedPoint::inf(), 2}}};
    CHECK_THROWS_AS(vandermonde_solve(bad, {1.0, 1.0}, false), DegenerateConfiguration);
}

TEST_CASE("vandermonde against explicit inverses") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        int g = 2 + trial % 2;
        VandermondeStack st;
        for (int i = 0; i < g; ++i) st.nodes.push_back({2.0 * i + u(rng) * 0.5, u(rng)});
        st.blocks = {{ExtendedPoint::inf(), 1}, {ExtendedPoint::at({-3.0, 0.5}), g - 1}};
        cvec rhs;
        for (int i = 0; i < g; ++i) rhs.push_back({u(rng), u(rng)});
        cmat v = st.dense();
        cmat inv;
        if (g == 2) {
            cx det = v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0);
            inv.resize(2, 2);
            inv << v(1, 1) / det, -v(0, 1) / det, -v(1, 0) / det, v(0, 0) / det;
        } else {
            // adjugate
            inv.resize(3, 3);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
                    inv(i, j) = v(r0, c0) * v(r1, c1) - v(r0, c1) * v(r1, c0);
                }
            cx det = v(0, 0) * inv(0, 0) + v(0, 1) * inv(1, 0) + v(0, 2) * inv(2, 0);
            inv /= det;
        }
        auto res = vandermonde_solve(st, rhs, false);
        cvecE expect = inv * to_eigen(rhs);
        CHECK((to_eigen(res.x) - expect).norm() < 1e-10 * (1 + expect.norm()));
        CHECK(res.cond >= 1.0);
    }
}
