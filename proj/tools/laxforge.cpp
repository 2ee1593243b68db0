#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "laxforge/harness.hpp"

using namespace laxforge;

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

SuiteConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"laxforge: verification harness for rational Lax pairs"};
    app.require_subcommand(1);
    CLI::App* verify = app.add_subcommand("verify", "run verification suites and emit a JSON report");

    std::string config_path, suites, out_path, fault;
    std::uint64_t seed = 0;
    std::vector<std::string> tols;
    verify->add_option("--config", config_path, "suite config or problem descriptor (JSON)")->required();
    auto* seed_opt = verify->add_option("--seed", seed, "base seed (overrides the config)");
    auto* suite_opt = verify->add_option("--suite", suites, "comma-separated suites; empty runs nothing");
    verify->add_option("--tol", tols, "tolerance override check=value (repeatable)");
    verify->add_option("--out", out_path, "write the report here instead of stdout");
    verify->add_option("--fault-inject", fault, "perturb H, nu or F")->check(CLI::IsMember({"H", "nu", "F"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    Report report;
    try {
        SuiteConfig cfg = load(config_path);
        if (seed_opt->count()) cfg.seed = seed;
        if (suite_opt->count()) cfg.suites = split(suites);
        for (const auto& t : tols) {
            const auto eq = t.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--tol expects check=value, got '" + t + "'");
            try {
                size_t used = 0;
                const std::string v = t.substr(eq + 1);
                cfg.tol[t.substr(0, eq)] = std::stod(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
            } catch (const std::logic_error&) {
                throw ConfigError("--tol value is not a number: '" + t + "'");
            }
        }
        if (!fault.empty()) cfg.fault = parse_fault(fault);
        validate(cfg);
        report = run_suite(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    const std::string text = report.to_json().dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "cannot write '" << out_path << "'\n";
            return 2;
        }
        out << text;
    }
    std::cerr << report.records.size() << " checks, " << report.failed() << " failed";
    for (const auto& s : report.failing_suites()) std::cerr << " [" << s << "]";
    std::cerr << "\n";
    return report.status();
}
