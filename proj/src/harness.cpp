#include "laxforge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <thread>

#include "laxforge/isospectral.hpp"
#include "laxforge/spectral.hpp"

namespace laxforge {

namespace {

using nlohmann::json;

constexpr double kFault = 1e-3;
constexpr int kSamples = 20;

const Rational kFaultF{1, 1000};

struct Entry {
    std::string suite;
    std::string cls;  // tolerance class: "exact", "fd", "ode" or "" (fixed by a criterion)
    double tol;
    bool lower_bound;
};

const std::map<std::string, Entry>& entries() {
    static const std::map<std::string, Entry> m = {
        {"gauge.L_QP", {"gauge", "exact", 1e-9, false}},
        {"gauge.L_QR", {"gauge", "exact", 1e-9, false}},
        {"gauge.A", {"gauge", "fd", 1e-5, false}},
        {"symplectic.qp_to_QP", {"symplectic", "", 1e-6, false}},
        {"symplectic.QP_to_QR_witness", {"symplectic", "", 1e-3, true}},
        {"hamiltonian-equivalence.oper_vs_geo", {"hamiltonian-equivalence", "exact", 1e-9, false}},
        {"compatibility.zero_curvature", {"compatibility", "fd", 1e-5, false}},
        {"spectral.det_windows", {"spectral", "exact", 1e-9, false}},
        {"spectral.det_projected", {"spectral", "exact", 1e-9, false}},
        {"spectral.H_vs_I", {"spectral", "exact", 1e-9, false}},
        {"spectral.Ham_vs_I", {"spectral", "exact", 1e-9, false}},
        {"isospectral.condition", {"isospectral", "fd", 1e-5, false}},
        {"isospectral.frozen_control", {"isospectral", "", 1e-2, true}},
        {"isospectral.hamiltonians", {"isospectral", "", 1e-6, false}},
        {"ode.finite", {"ode", "ode", 1e-6, false}},
        {"ode.infinity_Q", {"ode", "ode", 1e-6, false}},
        {"ode.infinity_R", {"ode", "ode", 1e-6, false}},
        {"ode.spot_values", {"ode", "exact", 1e-9, false}},
    };
    return m;
}

const std::set<std::string> kClasses = {"exact", "fd", "ode"};

double rel(cx a, cx b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

DeformationVector unit(TimeKey key) {
    DeformationVector a;
    a.alpha[key] = 1.0;
    return a;
}

cvec points_for(const Instance& in) {
    cvec poles = in.oper.q;
    for (const auto& p : in.profile.poles) poles.push_back(p.x);
    return sample_points(poles, kSamples, 7);
}

cx parse_cx(const json& j, const std::string& what) {
    if (j.is_number()) return cx(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return cx(j[0].get<double>(), j[1].get<double>());
    throw ConfigError(what + ": expected a number or [re, im]");
}

Case parse_case(const json& j) {
    Case c;
    if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_array()) {
        c.r_inf = j[0].get<int>();
        for (const auto& r : j[1]) {
            if (!r.is_number_integer()) throw ConfigError("case orders must be integers");
            c.orders.push_back(r.get<int>());
        }
        return c;
    }
    if (j.is_object() && j.contains("r_inf") && j["r_inf"].is_number_integer()) {
        c.r_inf = j["r_inf"].get<int>();
        if (j.contains("orders")) {
            if (!j["orders"].is_array()) throw ConfigError("case orders must be a list");
            for (const auto& r : j["orders"]) {
                if (!r.is_number_integer()) throw ConfigError("case orders must be integers");
                c.orders.push_back(r.get<int>());
            }
        }
        return c;
    }
    throw ConfigError("case must be [r_inf, [orders]] or {\"r_inf\": .., \"orders\": [..]}");
}

void check_case(const Case& c) {
    PoleProfile p{c.r_inf, {}};
    for (int r : c.orders) p.poles.push_back({cx{}, r});
    try {
        genus(p);
    } catch (const Error& e) {
        throw ConfigError("unsupported case " + c.name() + ": " + e.what());
    }
}

// pole key "inf" or "X<s>" (1-based)
int pole_of(const std::string& key, const PoleProfile& profile) {
    if (key == "inf") return -1;
    if (key.size() >= 2 && key[0] == 'X') {
        try {
            size_t used = 0;
            const int s = std::stoi(key.substr(1), &used);
            if (used == key.size() - 1 && s >= 1 && s <= profile.n()) return s - 1;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("unknown pole key '" + key + "'");
}

struct Item {
    std::size_t case_index;
    std::string name;
    std::uint64_t seed;
    std::function<Instance()> make;
};

struct Runner {
    const SuiteConfig& cfg;
    const Item& item;
    std::vector<CheckRecord>& out;

    void run(const std::string& check, const std::function<std::optional<double>()>& f) {
        const auto& e = entries().at(check);
        CheckRecord r;
        r.case_name = item.name;
        r.case_index = item.case_index;
        r.seed = item.seed;
        r.suite = e.suite;
        r.check = check;
        r.tol = tolerance_for(cfg, check);
        r.lower_bound = e.lower_bound;
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<double> v;
        try {
            v = f();
            if (!v) return;  // not applicable to this instance
            r.residual = *v;
            r.pass = std::isfinite(r.residual) && (e.lower_bound ? r.residual > r.tol : r.residual < r.tol);
        } catch (const std::exception& ex) {
            r.residual = std::numeric_limits<double>::quiet_NaN();
            r.pass = false;
            r.error = ex.what();
        }
        r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
};

CoeffMap faulted_H(const Instance& in, Fault fault) {
    CoeffMap H = solve_H(in.oper, in.chart, in.profile).H;
    if (fault == Fault::H)
        for (auto& [k, v] : H) v *= 1.0 + kFault;
    return H;
}

ProfileMatrix faulted(ProfileMatrix pm, Fault fault) {
    return fault == Fault::F ? perturb_profile(pm, kFaultF) : pm;
}

void suite_gauge(Runner& run, const Instance& in, Fault fault) {
    const auto& P = in.profile;
    const auto& T = in.chart;
    const cvec pts = points_for(in);
    const cx hf = fault == Fault::H ? cx(kFault) : cx{};
    auto oracle_L = [&](const GeoLax& geo) {
        const OperLax L = build_oper_L(in.oper, T, P, hf);
        const OperGaugeMatrix G = build_gauge(in.oper, T, P, in.omega, L.g0);
        double worst = 0;
        for (cx z : pts) worst = std::max(worst, relative_defect(geo.at(z), gauge_L(L, G, z)));
        return worst;
    };
    run.run("gauge.L_QP", [&]() -> std::optional<double> {
        return oracle_L(build_geo_L_QP(in.geo, T, P, in.omega));
    });
    run.run("gauge.L_QR", [&]() -> std::optional<double> {
        const GeoLax qp = build_geo_L_QP(in.geo, T, P, in.omega);
        return oracle_L(build_geo_L_QR(geo_to_lax(in.geo, P, T, in.omega, qp.g0), T, P, in.omega));
    });
    run.run("gauge.A", [&]() -> std::optional<double> {
        const OperLax L = build_oper_L(in.oper, T, P);
        double worst = 0;
        for (const TimeKey& key : free_directions(P, T)) {
            const DeformationVector a = unit(key);
            const OperDeformation Ao = build_oper_A(a, in.oper, L, T, P);
            GeoAOptions opt;
            opt.L_omega = lie_omega(Ao.nu, P, in.omega);
            opt.nu_fault = fault == Fault::nu ? cx(kFault) : cx{};
            const GeoDeformation Ag = build_geo_A(a, in.geo, T, P, in.omega, opt);
            const auto oracle = gauge_A(a, in.oper, T, P, in.omega, pts);
            for (size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, relative_defect(Ag.at(pts[i]), oracle[i]));
        }
        return worst;
    });
}

void suite_symplectic(Runner& run, const Instance& in) {
    const auto& P = in.profile;
    const auto& T = in.chart;
    run.run("symplectic.qp_to_QP", [&]() -> std::optional<double> {
        auto to_geo = [&](const cvec& x) { return flatten(qp_to_geo(unflatten_oper(x), in.omega, P)); };
        return symplectic_defect(to_geo, flatten(in.oper), 1e-3);
    });
    run.run("symplectic.QP_to_QR_witness", [&]() -> std::optional<double> {
        double norm2 = 0;
        for (cx p : in.geo.P_inf) norm2 += std::norm(p);
        for (const auto& ps : in.geo.P_fin)
            for (cx p : ps) norm2 += std::norm(p);
        if (std::sqrt(norm2) <= 0.1) return std::nullopt;
        // (q,p) -> (Q,P) is symplectic, so a defect of (q,p) -> (Q,R) is a defect of (Q,P) -> (Q,R).
        auto to_lax = [&](const cvec& x) {
            const GeoCoords geo = qp_to_geo(unflatten_oper(x), in.omega, P);
            return flatten(geo_to_lax(geo, P, T, in.omega, geo_g0(geo, T, P, in.omega)));
        };
        return symplectic_defect(to_lax, flatten(in.oper), 1e-3);
    });
}

void suite_hamiltonian(Runner& run, const Instance& in, Fault fault) {
    run.run("hamiltonian-equivalence.oper_vs_geo", [&]() -> std::optional<double> {
        const auto ho = hamiltonians_oper(faulted_H(in, fault), in.chart, in.profile);
        const auto hg = hamiltonians_geo(in.geo, in.chart, in.profile, in.omega);
        if (ho.size() != hg.size()) throw Error("Hamiltonian maps cover different times");
        double worst = 0;
        for (const auto& [k, v] : ho) worst = std::max(worst, rel(hg.at(k), v));
        return worst;
    });
}

void suite_compatibility(Runner& run, const Instance& in, Fault fault) {
    run.run("compatibility.zero_curvature", [&]() -> std::optional<double> {
        CompatOptions opt;
        if (fault == Fault::H) opt.h_fault = kFault;
        if (fault == Fault::nu) opt.nu_fault = kFault;
        double worst = 0;
        for (const TimeKey& key : free_directions(in.profile, in.chart))
            worst = std::max(worst, compatibility_residual(unit(key), in.oper, in.chart, in.profile, opt));
        return worst;
    });
}

void suite_spectral(Runner& run, const Instance& in, Fault fault) {
    const auto& P = in.profile;
    const auto& T = in.chart;
    auto lax = [&] { return build_geo_L_QP(in.geo, T, P, in.omega); };
    run.run("spectral.det_windows", [&]() -> std::optional<double> {
        return max_residual(det_windows(det_geo_L(lax(), T, P).exact, T, P));
    });
    run.run("spectral.det_projected", [&]() -> std::optional<double> {
        const CoeffMap H = faulted_H(in, fault);
        const DetForms d = det_geo_L(lax(), T, P, &H);
        double worst = 0;
        for (cx z : points_for(in)) worst = std::max(worst, rel(d.projected(z), d.exact(z)));
        return worst;
    });
    run.run("spectral.H_vs_I", [&]() -> std::optional<double> {
        const auto d = h_vs_invariants(lax(), faulted_H(in, fault), T, P);
        if (d.empty()) return std::nullopt;
        return max_residual(d);
    });
    run.run("spectral.Ham_vs_I", [&]() -> std::optional<double> {
        const auto d = ham_vs_invariants(lax(), hamiltonians_oper(faulted_H(in, fault), T, P), T, P);
        if (d.empty()) return std::nullopt;
        return max_residual(d);
    });
}

bool has_profile_matrices(const PoleProfile& p) {
    if (p.r_inf >= 4) return true;
    for (const auto& x : p.poles)
        if (x.r >= 2) return true;
    return false;
}

void suite_isospectral(Runner& run, const Instance& in, Fault fault) {
    const auto& P = in.profile;
    const auto& T = in.chart;
    auto lax = [&] {
        const GeoLax qp = build_geo_L_QP(in.geo, T, P, in.omega);
        return geo_to_lax(in.geo, P, T, in.omega, qp.g0);
    };
    IsoOptions opt;
    if (fault == Fault::F) opt.f_fault = kFaultF;
    if (fault == Fault::nu) opt.nu_fault = kFault;
    run.run("isospectral.condition", [&]() -> std::optional<double> {
        const IsoCoords iso = lax_to_iso(lax(), T, P, in.omega);
        double worst = 0;
        for (const TimeKey& key : free_directions(P, T))
            worst = std::max(worst, isospectral_residual(iso, unit(key), T, P, opt));
        return worst;
    });
    run.run("isospectral.frozen_control", [&]() -> std::optional<double> {
        // without profile matrices the Lax chart is already isospectral
        if (!has_profile_matrices(P)) return std::nullopt;
        const LaxCoords l = lax();
        double worst = 0;
        for (const TimeKey& key : free_directions(P, T))
            worst = std::max(worst, frozen_chart_residual(l, in.omega, unit(key), T, P));
        return worst;
    });
    run.run("isospectral.hamiltonians", [&]() -> std::optional<double> {
        const IsoCoords iso = lax_to_iso(lax(), T, P, in.omega);
        double worst = -1;
        for (const TimeKey& key : free_directions(P, T))
            if (key.k >= 1)
                worst = std::max(worst, iso_hamiltonian_defect(iso, key, T, P, 1e-4, 2.0,
                                                               fault == Fault::F ? kFaultF : Rational{}));
        if (worst < 0) return std::nullopt;
        return worst;
    });
}

void suite_ode(Runner& run, const Instance& in, Fault fault) {
    const auto& P = in.profile;
    const auto& T = in.chart;
    run.run("ode.finite", [&]() -> std::optional<double> {
        double worst = -1;
        for (int s = 0; s < P.n(); ++s)
            if (P.poles[s].r >= 2) worst = std::max(worst, ode_residual(faulted(solve_profile_finite(P, s, T), fault), T));
        if (worst < 0) return std::nullopt;
        return worst;
    });
    if (P.r_inf >= 4) {
        run.run("ode.infinity_Q", [&]() -> std::optional<double> {
            return ode_residual(faulted(solve_profile_infinity(P, T), fault), T);
        });
        run.run("ode.infinity_R", [&]() -> std::optional<double> {
            return ode_residual(faulted(solve_R_profiles(P, T).infinity, fault), T);
        });
    }
    run.run("ode.spot_values", [&]() -> std::optional<double> {
        double worst = -1;
        for (int s = 0; s < P.n(); ++s) {
            const int r = P.poles[s].r;
            if (r < 2) continue;
            const cmat F = faulted(solve_profile_finite(P, s, T), fault).evaluate(T);
            const cx t = T.fin(s, r - 1);
            for (int j = 1; j < r; ++j) {
                worst = std::max(worst, rel(F(j - 1, j - 1), std::pow(t, static_cast<double>(r - j) / (r - 1))));
                worst = std::max(worst, rel(F(j - 1, 0), T.fin(s, r - j)));
            }
        }
        const int ri = P.r_inf;
        if (ri >= 4) {
            const cmat F = faulted(solve_profile_infinity(P, T), fault).evaluate(T);
            const cmat G = faulted(solve_R_profiles(P, T).infinity, fault).evaluate(T);
            const cx t = T.inf(ri - 3);
            const double d = ri - 3;
            for (int k = 1; k <= ri - 4; ++k) worst = std::max(worst, rel(F(k + 1, k - 1), (ri - 3 - k) / d * t));
            for (int j = 1; j <= ri - 5; ++j) worst = std::max(worst, rel(G(j + 1, j - 1), (ri - 4 - j) / d * t));
            for (int i = 0; i < F.rows(); ++i) worst = std::max(worst, rel(F(i, i), 1.0));
            worst = std::max(worst, 0.0);
        }
        if (worst < 0) return std::nullopt;
        return worst;
    });
}

void run_item(const SuiteConfig& cfg, const Item& item, std::vector<CheckRecord>& out) {
    Runner run{cfg, item, out};
    Instance in;
    try {
        in = item.make();
    } catch (const std::exception& e) {
        CheckRecord r;
        r.case_name = item.name;
        r.case_index = item.case_index;
        r.seed = item.seed;
        r.suite = "instance";
        r.check = "instance.generate";
        r.residual = std::numeric_limits<double>::quiet_NaN();
        r.error = e.what();
        out.push_back(r);
        return;
    }
    const std::set<std::string> on(cfg.suites.begin(), cfg.suites.end());
    if (on.count("gauge")) suite_gauge(run, in, cfg.fault);
    if (on.count("symplectic")) suite_symplectic(run, in);
    if (on.count("hamiltonian-equivalence")) suite_hamiltonian(run, in, cfg.fault);
    if (on.count("compatibility")) suite_compatibility(run, in, cfg.fault);
    if (on.count("spectral")) suite_spectral(run, in, cfg.fault);
    if (on.count("isospectral")) suite_isospectral(run, in, cfg.fault);
    if (on.count("ode")) suite_ode(run, in, cfg.fault);
}

std::vector<Item> work_items(const SuiteConfig& cfg) {
    std::vector<Item> items;
    std::size_t idx = 0;
    for (const Case& c : cfg.cases) {
        for (int i = 0; i < cfg.instances_per_case; ++i) {
            const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
            items.push_back({idx, c.name(), seed, [c, seed] { return generate_instance(c, seed); }});
        }
        ++idx;
    }
    for (size_t k = 0; k < cfg.problems.size(); ++k) {
        const Problem& p = cfg.problems[k];
        const std::uint64_t base = p.has_seed ? p.seed : cfg.seed;
        const std::string name = "problem" + std::to_string(k + 1) + case_of(p.profile).name();
        for (int i = 0; i < p.instances; ++i) {
            const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
            items.push_back({idx, name, seed, [p, seed] { return instance_for(p.profile, p.chart, p.omega, seed); }});
        }
        ++idx;
    }
    return items;
}

}  // namespace

Fault parse_fault(const std::string& name) {
    if (name.empty() || name == "none") return Fault::none;
    if (name == "H") return Fault::H;
    if (name == "nu") return Fault::nu;
    if (name == "F") return Fault::F;
    throw ConfigError("unknown fault '" + name + "' (expected H, nu or F)");
}

std::string to_string(Fault f) {
    switch (f) {
        case Fault::H: return "H";
        case Fault::nu: return "nu";
        case Fault::F: return "F";
        default: return "none";
    }
}

std::set<std::string> suites_depending_on(Fault f) {
    switch (f) {
        case Fault::H: return {"gauge", "hamiltonian-equivalence", "compatibility", "spectral"};
        case Fault::nu: return {"gauge", "compatibility", "isospectral"};
        case Fault::F: return {"isospectral", "ode"};
        default: return {};
    }
}

const std::vector<std::string>& all_suites() {
    static const std::vector<std::string> s = {"gauge",    "symplectic",  "hamiltonian-equivalence", "compatibility",
                                               "spectral", "isospectral", "ode"};
    return s;
}

const std::map<std::string, CheckInfo>& check_catalog() {
    static const std::map<std::string, CheckInfo> m = [] {
        std::map<std::string, CheckInfo> out;
        for (const auto& [name, e] : entries()) out[name] = {e.suite, e.tol, e.lower_bound};
        return out;
    }();
    return m;
}

Problem parse_problem(const json& j) {
    if (!j.is_object()) throw ConfigError("problem descriptor must be an object");
    static const std::set<std::string> known = {"r_inf", "poles", "times", "monodromies", "seed", "omega", "instances"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown problem key '" + k + "'");
    if (!j.contains("r_inf") || !j["r_inf"].is_number_integer()) throw ConfigError("problem needs an integer r_inf");
    Problem p;
    p.profile.r_inf = j["r_inf"].get<int>();
    if (j.contains("poles")) {
        if (!j["poles"].is_array()) throw ConfigError("poles must be a list");
        for (const auto& x : j["poles"]) {
            if (!x.is_object() || !x.contains("x") || !x.contains("r") || !x["r"].is_number_integer())
                throw ConfigError("pole must be {\"x\": [re, im], \"r\": int}");
            p.profile.poles.push_back({parse_cx(x["x"], "pole position"), x["r"].get<int>()});
        }
    }
    try {
        genus(p.profile);
    } catch (const Error& e) {
        throw ConfigError(std::string("unsupported problem: ") + e.what());
    }
    TimeChart raw = empty_chart(p.profile);
    auto slot = [&](int pole, int k) -> cx& {
        cvec& v = pole < 0 ? raw.t_inf : raw.t_fin[pole];
        if (k >= static_cast<int>(v.size())) throw ConfigError("too many times for a pole");
        return v[k];
    };
    if (j.contains("times")) {
        if (!j["times"].is_object()) throw ConfigError("times must be an object");
        for (const auto& [key, list] : j["times"].items()) {
            const int pole = pole_of(key, p.profile);
            if (!list.is_array()) throw ConfigError("times." + key + " must be a list");
            for (size_t k = 0; k < list.size(); ++k)
                slot(pole, static_cast<int>(k) + 1) = parse_cx(list[k], "times." + key);
        }
    }
    if (j.contains("monodromies")) {
        if (!j["monodromies"].is_object()) throw ConfigError("monodromies must be an object");
        for (const auto& [key, v] : j["monodromies"].items())
            slot(pole_of(key, p.profile), 0) = parse_cx(v, "monodromies." + key);
    }
    try {
        p.chart = normalize(p.profile, raw);
    } catch (const Error& e) {
        throw ConfigError(std::string("problem chart: ") + e.what());
    }
    if (j.contains("omega")) p.omega = parse_cx(j["omega"], "omega");
    if (p.omega == cx{}) throw ConfigError("omega must be nonzero");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
        p.seed = j["seed"].get<std::uint64_t>();
        p.has_seed = true;
    }
    if (j.contains("instances")) {
        if (!j["instances"].is_number_integer() || j["instances"].get<int>() < 0)
            throw ConfigError("instances must be a nonnegative integer");
        p.instances = j["instances"].get<int>();
    }
    return p;
}

SuiteConfig default_config() {
    SuiteConfig c;
    c.cases = {{4, {}}, {3, {2}}, {2, {2}}, {1, {3}}, {5, {1, 2}}};
    c.instances_per_case = 10;
    c.seed = 1;
    c.suites = all_suites();
    return c;
}

SuiteConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("r_inf")) {
        SuiteConfig c;
        c.suites = all_suites();
        c.problems.push_back(parse_problem(j));
        if (c.problems.back().has_seed) c.seed = c.problems.back().seed;
        return c;
    }
    static const std::set<std::string> known = {"cases", "problems", "instances_per_case", "seed", "suites", "tol",
                                                "fault"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    SuiteConfig c;
    c.suites = all_suites();
    if (j.contains("cases")) {
        if (!j["cases"].is_array()) throw ConfigError("cases must be a list");
        for (const auto& x : j["cases"]) c.cases.push_back(parse_case(x));
    }
    if (j.contains("problems")) {
        if (!j["problems"].is_array()) throw ConfigError("problems must be a list");
        for (const auto& x : j["problems"]) c.problems.push_back(parse_problem(x));
    }
    if (j.contains("instances_per_case")) {
        if (!j["instances_per_case"].is_number_integer() || j["instances_per_case"].get<int>() < 0)
            throw ConfigError("instances_per_case must be a nonnegative integer");
        c.instances_per_case = j["instances_per_case"].get<int>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("suites")) {
        if (!j["suites"].is_array()) throw ConfigError("suites must be a list");
        c.suites.clear();
        for (const auto& s : j["suites"]) {
            if (!s.is_string()) throw ConfigError("suite names must be strings");
            c.suites.push_back(s.get<std::string>());
        }
    }
    if (j.contains("tol")) {
        if (!j["tol"].is_object()) throw ConfigError("tol must be an object");
        for (const auto& [k, v] : j["tol"].items()) {
            if (!v.is_number()) throw ConfigError("tol." + k + " must be a number");
            c.tol[k] = v.get<double>();
        }
    }
    if (j.contains("fault")) {
        if (!j["fault"].is_string()) throw ConfigError("fault must be a string");
        c.fault = parse_fault(j["fault"].get<std::string>());
    }
    validate(c);
    return c;
}

void validate(const SuiteConfig& config) {
    const auto& suites = all_suites();
    std::set<std::string> seen;
    for (const auto& s : config.suites) {
        if (std::find(suites.begin(), suites.end(), s) == suites.end()) throw ConfigError("unknown suite '" + s + "'");
        if (!seen.insert(s).second) throw ConfigError("suite '" + s + "' listed twice");
    }
    for (const Case& c : config.cases) check_case(c);
    if (config.instances_per_case < 0) throw ConfigError("instances_per_case must be nonnegative");
    for (const auto& [k, v] : config.tol) {
        if (!entries().count(k) && !kClasses.count(k)) throw ConfigError("unknown tolerance key '" + k + "'");
        if (!(v > 0) || !std::isfinite(v)) throw ConfigError("tolerance for '" + k + "' must be positive");
    }
}

double tolerance_for(const SuiteConfig& config, const std::string& check) {
    const Entry& e = entries().at(check);
    if (auto it = config.tol.find(check); it != config.tol.end()) return it->second;
    if (!e.cls.empty())
        if (auto it = config.tol.find(e.cls); it != config.tol.end()) return it->second;
    return e.tol;
}

std::size_t Report::failed() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.pass; }));
}

std::set<std::string> Report::failing_suites() const {
    std::set<std::string> out;
    for (const auto& r : records)
        if (!r.pass) out.insert(r.suite);
    return out;
}

json Report::to_json(bool wall_times) const {
    json cfg;
    cfg["cases"] = json::array();
    for (const Case& c : config.cases) cfg["cases"].push_back(c.name());
    cfg["problems"] = config.problems.size();
    cfg["instances_per_case"] = config.instances_per_case;
    cfg["seed"] = config.seed;
    cfg["suites"] = config.suites;
    cfg["fault"] = to_string(config.fault);
    json tol = json::object();
    for (const auto& [name, e] : entries())
        if (std::find(config.suites.begin(), config.suites.end(), e.suite) != config.suites.end())
            tol[name] = tolerance_for(config, name);
    cfg["tolerances"] = tol;

    json recs = json::array();
    std::map<std::string, std::pair<int, int>> by_suite;  // checks, failed
    double wall = 0;
    for (const auto& r : records) {
        json x;
        x["case"] = r.case_name;
        x["seed"] = r.seed;
        x["suite"] = r.suite;
        x["check"] = r.check;
        if (std::isfinite(r.residual))
            x["residual"] = r.residual;
        else
            x["residual"] = nullptr;
        x["tol"] = r.tol;
        x["bound"] = r.lower_bound ? "min" : "max";
        x["pass"] = r.pass;
        if (!r.error.empty()) x["error"] = r.error;
        if (wall_times) x["wall_ms"] = r.wall_ms;
        wall += r.wall_ms;
        auto& s = by_suite[r.suite];
        ++s.first;
        if (!r.pass) ++s.second;
        recs.push_back(std::move(x));
    }
    json summary;
    summary["checks"] = records.size();
    summary["passed"] = records.size() - failed();
    summary["failed"] = failed();
    json suites = json::object();
    for (const auto& [name, s] : by_suite) suites[name] = {{"checks", s.first}, {"failed", s.second}};
    summary["suites"] = suites;
    summary["status"] = status();
    if (wall_times) summary["wall_ms"] = wall;

    json out;
    out["config"] = cfg;
    out["records"] = recs;
    out["summary"] = summary;
    return out;
}

int thread_cap() {
    if (const char* env = std::getenv("LAXFORGE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

Report run_suite(const SuiteConfig& config) {
    validate(config);
    Report rep;
    rep.config = config;
    if (config.suites.empty()) return rep;

    const std::vector<Item> items = work_items(config);
    std::vector<std::vector<CheckRecord>> results(items.size());
    const int cap = config.threads > 0 ? config.threads : thread_cap();
    const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cap), items.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) run_item(config, items[i], results[i]);
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    for (auto& r : results)
        for (auto& x : r) rep.records.push_back(std::move(x));
    std::stable_sort(rep.records.begin(), rep.records.end(), [](const CheckRecord& a, const CheckRecord& b) {
        if (a.case_index != b.case_index) return a.case_index < b.case_index;
        if (a.seed != b.seed) return a.seed < b.seed;
        return a.check < b.check;
    });
    return rep;
}

}  // namespace laxforge
