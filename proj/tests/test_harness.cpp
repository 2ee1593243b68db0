#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "laxforge/harness.hpp"

using namespace laxforge;
using nlohmann::json;

namespace {

SuiteConfig small(int instances) {
    SuiteConfig c = default_config();
    c.instances_per_case = instances;
    return c;
}

json problem_json() {
    return json::parse(R"({
        "r_inf": 3,
        "poles": [{"x": [0.5, 0.2], "r": 2}],
        "times": {"X1": [[1.2, 0.1]]},
        "monodromies": {"inf": [0.3, 0.0], "X1": [0.2, -0.1]},
        "seed": 11,
        "instances": 3
    })");
}

}  // namespace

TEST_CASE("default config") {
    const SuiteConfig c = default_config();
    REQUIRE(c.cases.size() == 5);
    CHECK(c.cases[4].name() == "(5,[1,2])");
    CHECK(c.instances_per_case == 10);
    CHECK(c.suites == all_suites());
    CHECK(all_suites().size() == 7);
}

TEST_CASE("config parsing") {
    const SuiteConfig c = parse_config(json::parse(R"({
        "cases": [[4, []], {"r_inf": 2, "orders": [1, 2]}],
        "instances_per_case": 3, "seed": 9, "suites": ["ode", "gauge"],
        "tol": {"fd": 1e-4, "gauge.L_QP": 1e-7}, "fault": "nu"})"));
    REQUIRE(c.cases.size() == 2);
    CHECK(c.cases[1].name() == "(2,[1,2])");
    CHECK(c.instances_per_case == 3);
    CHECK(c.seed == 9);
    CHECK(c.suites == std::vector<std::string>{"ode", "gauge"});
    CHECK(c.fault == Fault::nu);
    CHECK(tolerance_for(c, "gauge.L_QP") == 1e-7);
    CHECK(tolerance_for(c, "gauge.L_QR") == 1e-9);
    CHECK(tolerance_for(c, "gauge.A") == 1e-4);
    CHECK(tolerance_for(c, "compatibility.zero_curvature") == 1e-4);
    CHECK(tolerance_for(c, "ode.finite") == 1e-6);
    CHECK(tolerance_for(c, "symplectic.qp_to_QP") == 1e-6);

    CHECK(parse_config(json::parse(R"({"suites": []})")).suites.empty());
    CHECK(parse_config(json::object()).suites == all_suites());
}

TEST_CASE("config errors") {
    const char* bad[] = {
        R"([1, 2])",
        R"({"casez": []})",
        R"({"cases": [[3, []]]})",
        R"({"cases": [[0, [4]]]})",
        R"({"cases": [[3, [0, 2]]]})",
        R"({"cases": [3]})",
        R"({"suites": ["gauge", "gauge"]})",
        R"({"suites": ["nope"]})",
        R"({"tol": {"gauge.nope": 1e-3}})",
        R"({"tol": {"fd": -1}})",
        R"({"tol": {"fd": "small"}})",
        R"({"fault": "X"})",
        R"({"instances_per_case": -1})",
        R"({"seed": -4})",
    };
    for (const char* text : bad) {
        CAPTURE(text);
        CHECK_THROWS_AS(parse_config(json::parse(text)), ConfigError);
    }
    CHECK(parse_fault("none") == Fault::none);
    CHECK(to_string(parse_fault("F")) == "F");
}

TEST_CASE("problem descriptors") {
    const Problem p = parse_problem(problem_json());
    CHECK(p.profile.r_inf == 3);
    REQUIRE(p.profile.n() == 1);
    CHECK(p.profile.poles[0].x == cx(0.5, 0.2));
    CHECK(p.chart.t_inf == cvec{cx(0.3, 0.0), 0.0, 1.0});  // frozen t_{inf,1} = 0, t_{inf,2} = 1
    CHECK(p.chart.t_fin[0] == cvec{cx(0.2, -0.1), cx(1.2, 0.1)});
    CHECK(p.seed == 11);
    CHECK(p.instances == 3);

    const SuiteConfig c = parse_config(problem_json());
    CHECK(c.problems.size() == 1);
    CHECK(c.cases.empty());
    CHECK(c.seed == 11);

    auto broken = [](const std::function<void(json&)>& edit) {
        json j = problem_json();
        edit(j);
        return j;
    };
    const json errs[] = {
        broken([](json& j) { j["times"]["inf"] = {0.0, 0.5}; }),          // conflicts with t_{inf,2} = 1
        broken([](json& j) { j["times"]["X1"] = {1.0, 2.0}; }),           // too many times
        broken([](json& j) { j["times"]["X1"] = {0.0}; }),                // vanishing leading time
        broken([](json& j) { j["times"]["X2"] = {1.0}; }),                // no such pole
        broken([](json& j) { j["poles"][0]["r"] = 0; }),
        broken([](json& j) { j["poles"] = json::array(); }),              // genus 0
        broken([](json& j) { j["poles"][0]["x"] = {1.0, 2.0, 3.0}; }),
        broken([](json& j) { j["omega"] = 0.0; }),
        broken([](json& j) { j["extra"] = 1; }),
    };
    for (const auto& j : errs) {
        CAPTURE(j.dump());
        CHECK_THROWS_AS(parse_problem(j), ConfigError);
    }
}

TEST_CASE("empty suite list") {
    SuiteConfig c = default_config();
    c.suites.clear();
    const Report r = run_suite(c);
    CHECK(r.records.empty());
    CHECK(r.status() == 0);
    CHECK(r.to_json()["summary"]["checks"] == 0);
}

TEST_CASE("unsupported case is a config error") {
    SuiteConfig c = default_config();
    c.cases.push_back({2, {1}});
    CHECK_THROWS_AS(run_suite(c), ConfigError);
}

TEST_CASE("small run passes, is ordered and deterministic") {
    SuiteConfig c = small(2);
    c.threads = 1;
    const Report a = run_suite(c);
    c.threads = 3;
    const Report b = run_suite(c);
    CHECK(a.status() == 0);
    CHECK(a.failed() == 0);
    CHECK(a.to_json(false).dump() == b.to_json(false).dump());
    for (size_t i = 1; i < a.records.size(); ++i) {
        const auto& p = a.records[i - 1];
        const auto& q = a.records[i];
        const bool ordered = p.case_index < q.case_index ||
                             (p.case_index == q.case_index && (p.seed < q.seed || (p.seed == q.seed && p.check < q.check)));
        CHECK(ordered);
    }
    std::set<std::string> checks;
    for (const auto& r : a.records) checks.insert(r.check);
    for (const auto& [name, info] : check_catalog()) {
        CAPTURE(name);
        CHECK(checks.count(name) == 1);
    }
    for (const auto& r : a.records)
        if (r.lower_bound) CHECK(r.residual > r.tol);

    const json j = a.to_json();
    CHECK(j["records"][0].contains("wall_ms"));
    CHECK(!a.to_json(false)["records"][0].contains("wall_ms"));
    CHECK(j["summary"]["checks"] == a.records.size());
}

TEST_CASE("explicit problem runs") {
    SuiteConfig c = parse_config(problem_json());
    const Report r = run_suite(c);
    CHECK(r.status() == 0);
    std::set<std::uint64_t> seeds;
    for (const auto& x : r.records) {
        seeds.insert(x.seed);
        CHECK(x.case_name == "problem1(3,[2])");
    }
    CHECK(seeds == std::set<std::uint64_t>{11, 12, 13});
}

TEST_CASE("fault injection flips exactly the dependent suites") {
    for (Fault f : {Fault::H, Fault::nu, Fault::F}) {
        CAPTURE(to_string(f));
        SuiteConfig c = small(2);
        c.fault = f;
        const Report r = run_suite(c);
        CHECK(r.status() == 1);
        CHECK(r.failing_suites() == suites_depending_on(f));
    }
    CHECK(suites_depending_on(Fault::none).empty());
}

TEST_CASE("tolerance overrides change verdicts only") {
    SuiteConfig c = small(1);
    c.suites = {"spectral"};
    const Report honest = run_suite(c);
    c.tol["spectral.det_windows"] = 1e-300;
    const Report strict = run_suite(c);
    REQUIRE(honest.records.size() == strict.records.size());
    for (size_t i = 0; i < honest.records.size(); ++i) {
        CHECK(honest.records[i].residual == strict.records[i].residual);
        if (strict.records[i].check == "spectral.det_windows")
            CHECK(strict.records[i].pass == (strict.records[i].residual < 1e-300));
    }
}

TEST_CASE("thread cap from the environment") {
    setenv("LAXFORGE_THREADS", "3", 1);
    CHECK(thread_cap() == 3);
    setenv("LAXFORGE_THREADS", "zero", 1);
    CHECK(thread_cap() >= 1);
    setenv("LAXFORGE_THREADS", "-2", 1);
    CHECK(thread_cap() >= 1);
    unsetenv("LAXFORGE_THREADS");
    CHECK(thread_cap() >= 1);
}
