#include "laxforge/instance.hpp"

#include <algorithm>
#include <numbers>

namespace laxforge {

std::string Case::name() const {
    std::string s = "(" + std::to_string(r_inf) + ",[";
    for (size_t i = 0; i < orders.size(); ++i) s += (i ? "," : "") + std::to_string(orders[i]);
    return s + "])";
}

cx random_annulus(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> rad(lo, hi), ang(0.0, 2.0 * std::numbers::pi);
    return std::polar(rad(rng), ang(rng));
}

namespace {

bool try_draw(const Case& c, std::mt19937_64& rng, Instance& out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PoleProfile prof{c.r_inf, {}};
    for (int r : c.orders) prof.poles.push_back({cx{}, r});
    const int n = prof.n();
    for (int s = 0; s < n; ++s) prof.poles[s].x = cx(2.0 * u(rng), 2.0 * u(rng));
    prof = normalize_positions(prof);
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < s; ++j)
            if (std::abs(prof.poles[s].x - prof.poles[j].x) < 0.5) return false;

    TimeChart raw = empty_chart(prof);
    for (auto& t : raw.t_inf) t = random_annulus(rng);
    for (int s = 0; s < n; ++s) {
        for (auto& t : raw.t_fin[s]) t = random_annulus(rng);
        const int r = prof.poles[s].r;
        if (r >= 2) {
            cx& lead = raw.t_fin[s][r - 1];
            lead = cx(std::abs(lead.real()) + 0.25, lead.imag());
        }
    }
    for (const auto& key : frozen_keys(prof))
        if (key.k >= 0) (key.pole < 0 ? raw.t_inf[key.k] : raw.t_fin[key.pole][key.k]) = cx{};
    out.chart = normalize(prof, raw);
    out.profile = prof;
    out.omega = prof.r_inf == 1 ? random_annulus(rng, 0.7, 1.5) : cx(1.0);
    return draw_qp(rng, out);
}

}  // namespace

bool draw_qp(std::mt19937_64& rng, Instance& out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const PoleProfile& prof = out.profile;
    const int g = genus(prof);
    out.oper.q.clear();
    out.oper.p.clear();
    for (int i = 0; i < g; ++i) {
        cx q;
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            q = cx(1.5 * u(rng), 1.5 * u(rng));
            ok = true;
            for (cx o : out.oper.q) ok = ok && std::abs(q - o) >= 0.1;
            for (const auto& p : prof.poles) ok = ok && std::abs(q - p.x) >= 0.1;
        }
        if (!ok) return false;
        out.oper.q.push_back(q);
        out.oper.p.push_back(cx(u(rng), u(rng)));
    }
    std::sort(out.oper.q.begin(), out.oper.q.end(), [](cx a, cx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    out.geo = qp_to_geo(out.oper, out.omega, prof);
    return true;
}

Instance generate_instance(const Case& c, std::uint64_t seed) {
    PoleProfile check{c.r_inf, {}};
    for (int r : c.orders) check.poles.push_back({cx{}, r});
    genus(check);
    std::mt19937_64 rng(seed);
    Instance inst;
    for (int attempt = 0; attempt < 100; ++attempt)
        if (try_draw(c, rng, inst)) return inst;
    throw Error("instance generation failed after 100 draws for " + c.name());
}

Instance instance_for(const PoleProfile& profile, const TimeChart& raw, cx omega, std::uint64_t seed) {
    genus(profile);
    Instance inst;
    inst.profile = profile;
    inst.chart = normalize(profile, raw);
    inst.omega = omega;
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt)
        if (draw_qp(rng, inst)) return inst;
    throw Error("instance generation failed after 100 draws");
}

Case case_of(const PoleProfile& profile) {
    Case c{profile.r_inf, {}};
    for (const auto& p : profile.poles) c.orders.push_back(p.r);
    return c;
}

}  // namespace laxforge
