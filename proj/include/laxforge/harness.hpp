#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "laxforge/instance.hpp"

namespace laxforge {

struct ConfigError : Error {
    using Error::Error;
};

enum class Fault { none, H, nu, F };

Fault parse_fault(const std::string& name);  // "none", "H", "nu", "F"
std::string to_string(Fault f);

// Suites whose checks consume the faulted quantity.
std::set<std::string> suites_depending_on(Fault f);

const std::vector<std::string>& all_suites();

struct CheckInfo {
    std::string suite;
    double tol = 0;
    bool lower_bound = false;  // pass iff residual > tol (witnesses and negative controls)
};
// Every check name the harness can emit, with its default tolerance.
const std::map<std::string, CheckInfo>& check_catalog();

// A fixed profile and chart; each instance draws its own (q, p).
struct Problem {
    PoleProfile profile;
    TimeChart chart;  // normalized
    cx omega{1.0};
    std::uint64_t seed = 0;
    bool has_seed = false;
    int instances = 1;
};

// {"r_inf", "poles": [{"x": [re, im], "r"}], "times": {"inf": [...], "X1": [...]},
//  "monodromies": {"inf": [re, im], "X1": [re, im]}, "seed", "omega", "instances"}.
// times list t_{p,1}, t_{p,2}, ...; monodromies are t_{p,0}. Missing entries are zero
// before normalization. Throws ConfigError.
Problem parse_problem(const nlohmann::json& j);

struct SuiteConfig {
    std::vector<Case> cases;
    std::vector<Problem> problems;
    int instances_per_case = 10;
    std::uint64_t seed = 1;
    std::map<std::string, double> tol;  // by check name, or "exact" / "fd" / "ode" for a whole class
    std::vector<std::string> suites;
    Fault fault = Fault::none;
    int threads = 0;  // 0: LAXFORGE_THREADS, else hardware concurrency
};

// All suites on (4,[]), (3,[2]), (2,[2]), (1,[3]), (5,[1,2]) with 10 instances each.
SuiteConfig default_config();
// Either a suite config {"cases", "problems", "instances_per_case", "seed", "suites", "tol",
// "fault"} or a bare problem descriptor. Throws ConfigError.
SuiteConfig parse_config(const nlohmann::json& j);
// Validates suites, cases and tolerance keys. Throws ConfigError.
void validate(const SuiteConfig& config);
double tolerance_for(const SuiteConfig& config, const std::string& check);

struct CheckRecord {
    std::string case_name;
    std::size_t case_index = 0;
    std::uint64_t seed = 0;
    std::string suite;
    std::string check;
    double residual = 0;
    double tol = 0;
    bool lower_bound = false;
    bool pass = false;
    double wall_ms = 0;
    std::string error;  // set when the check threw
};

struct Report {
    SuiteConfig config;
    std::vector<CheckRecord> records;  // ordered by (case, seed, check)

    std::size_t failed() const;
    std::set<std::string> failing_suites() const;
    int status() const { return failed() == 0 ? 0 : 1; }
    nlohmann::json to_json(bool wall_times = true) const;
};

// LAXFORGE_THREADS if set to a positive integer, else hardware concurrency (at least 1).
int thread_cap();

Report run_suite(const SuiteConfig& config);

}  // namespace laxforge
