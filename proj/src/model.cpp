#include "laxforge/model.hpp"

#include <cmath>
#include <sstream>

namespace laxforge {

int PoleProfile::total_order() const {
    int r = r_inf;
    for (const auto& p : poles) r += p.r;
    return r;
}

int genus(const PoleProfile& profile) {
    if (profile.r_inf < 1) throw UnsupportedProfile("r_inf must be >= 1");
    for (const auto& p : profile.poles)
        if (p.r < 1) throw UnsupportedProfile("pole orders must be >= 1");
    int g = profile.total_order() - 3;
    if (g < 1) throw UnsupportedProfile("genus " + std::to_string(g) + " < 1");
    return g;
}

DimensionCount dimension_count(const PoleProfile& profile) {
    const int r = profile.total_order();
    DimensionCount d;
    d.total = 4 * r - 7;
    d.sl2_part = 3 * (r - 1) - 3;
    d.trace_part = r - 1;
    d.symplectic = 2 * genus(profile);
    d.times = r;
    return d;
}

std::string to_string(const TimeKey& key) {
    std::ostringstream os;
    if (key.k == -1) {
        os << "X" << key.pole + 1;
    } else if (key.pole < 0) {
        os << "t_inf," << key.k;
    } else {
        os << "t_X" << key.pole + 1 << "," << key.k;
    }
    return os.str();
}

TimeChart empty_chart(const PoleProfile& profile) {
    TimeChart c;
    c.t_inf.assign(profile.r_inf, cx{});
    for (const auto& p : profile.poles) c.t_fin.emplace_back(p.r, cx{});
    return c;
}

namespace {

struct FrozenValue {
    TimeKey key;
    cx value;
};

std::vector<FrozenValue> frozen_values(const PoleProfile& profile) {
    std::vector<FrozenValue> out;
    const int ri = profile.r_inf;
    const int n = profile.n();
    if (ri >= 3) {
        out.push_back({{-1, ri - 1}, 1.0});
        out.push_back({{-1, ri - 2}, 0.0});
    } else if (ri == 2) {
        out.push_back({{-1, 1}, 1.0});
        if (n >= 1) out.push_back({{0, -1}, 0.0});
    } else {
        if (n >= 2) {
            out.push_back({{0, -1}, 0.0});
            out.push_back({{1, -1}, 1.0});
        } else if (n == 1) {
            out.push_back({{0, -1}, 0.0});
            if (profile.poles[0].r >= 2) out.push_back({{0, profile.poles[0].r - 1}, 1.0});
        }
    }
    return out;
}

bool same(cx a, cx b) { return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(b)); }

}  // namespace

TimeChart normalize(const PoleProfile& profile, const TimeChart& raw) {
    if (static_cast<int>(raw.t_inf.size()) != profile.r_inf || static_cast<int>(raw.t_fin.size()) != profile.n())
        throw MalformedInput("time chart shape does not match the pole profile");
    for (int s = 0; s < profile.n(); ++s)
        if (static_cast<int>(raw.t_fin[s].size()) != profile.poles[s].r)
            throw MalformedInput("time chart shape does not match pole " + std::to_string(s + 1));

    TimeChart out = raw;
    out.frozen.clear();
    for (const auto& f : frozen_values(profile)) {
        out.frozen.insert(f.key);
        if (f.key.k == -1) {
            cx x = profile.poles[f.key.pole].x;
            if (!same(x, f.value))
                throw NormalizationConflict("position " + to_string(f.key) + " must be " +
                                            std::to_string(f.value.real()));
            continue;
        }
        cx& slot = f.key.pole < 0 ? out.t_inf[f.key.k] : out.t_fin[f.key.pole][f.key.k];
        bool unset = slot == cx{};
        if (!same(slot, f.value) && !unset)
            throw NormalizationConflict(to_string(f.key) + " conflicts with its frozen value");
        slot = f.value;
    }
    for (int s = 0; s < profile.n(); ++s) {
        int r = profile.poles[s].r;
        if (r >= 2 && out.t_fin[s][r - 1] == cx{})
            throw MalformedInput("leading time at X" + std::to_string(s + 1) + " must be nonzero");
    }
    return out;
}

std::set<TimeKey> frozen_keys(const PoleProfile& profile) {
    std::set<TimeKey> out;
    for (const auto& f : frozen_values(profile)) out.insert(f.key);
    return out;
}

PoleProfile normalize_positions(const PoleProfile& profile) {
    PoleProfile out = profile;
    for (const auto& f : frozen_values(profile))
        if (f.key.k == -1) out.poles[f.key.pole].x = f.value;
    return out;
}

std::vector<TimeKey> free_directions(const PoleProfile& profile, const TimeChart& chart) {
    std::vector<TimeKey> dirs;
    for (int k = 1; k < profile.r_inf; ++k)
        if (!chart.frozen.count({-1, k})) dirs.push_back({-1, k});
    for (int s = 0; s < profile.n(); ++s) {
        for (int k = 1; k < profile.poles[s].r; ++k)
            if (!chart.frozen.count({s, k})) dirs.push_back({s, k});
        if (!chart.frozen.count({s, -1})) dirs.push_back({s, -1});
    }
    return dirs;
}

bool DeformationVector::empty() const {
    for (const auto& [k, v] : alpha)
        if (v != cx{}) return false;
    return true;
}

void require_unfrozen(const DeformationVector& alpha, const TimeChart& chart) {
    for (const auto& [key, v] : alpha.alpha) {
        if (v == cx{}) continue;
        if (chart.frozen.count(key)) throw ChartError("deformation along frozen " + to_string(key));
        if (key.k == 0) throw ChartError("monodromies are not deformation directions");
    }
}

void shift_along(PoleProfile& profile, TimeChart& chart, const DeformationVector& alpha, cx h) {
    for (const auto& [key, v] : alpha.alpha) {
        if (key.k == -1) {
            profile.poles[key.pole].x += h * v;
        } else if (key.pole < 0) {
            chart.t_inf[key.k] += h * v;
        } else {
            chart.t_fin[key.pole][key.k] += h * v;
        }
    }
}

std::vector<ConstraintViolation> validate_chart_constraints(const GeoCoords& geo, const PoleProfile& profile,
                                                            cx omega) {
    std::vector<ConstraintViolation> out;
    const int ri = profile.r_inf;
    if (ri >= 3) return out;
    cx sq1{}, pq{}, moment{}, shifted{};
    for (int s = 0; s < profile.n(); ++s) {
        const auto& Q = geo.Q_fin[s];
        const auto& P = geo.P_fin[s];
        cx X = profile.poles[s].x;
        int r = profile.poles[s].r;
        sq1 += Q[0];
        moment += X * Q[0] + (r >= 2 ? Q[1] : cx{});
        for (int m = 0; m < r; ++m) {
            pq += P[m] * Q[m];
            shifted += X * P[m] * Q[m];
            if (m + 1 < r) shifted += P[m] * Q[m + 1];
        }
    }
    if (ri == 2) {
        out.push_back({"sum Q_X,1 = omega", std::abs(sq1 - omega)});
        out.push_back({"sum P.Q = 0", std::abs(pq)});
    } else {
        out.push_back({"sum Q_X,1 = 0", std::abs(sq1)});
        out.push_back({"sum Q_X,2 + X Q_X,1 = omega", std::abs(moment - omega)});
        out.push_back({"sum P.Q = 0", std::abs(pq)});
        out.push_back({"sum P.Q shifted = 0", std::abs(shifted)});
    }
    return out;
}

std::vector<ConstraintViolation> validate_chart_constraints(const LaxCoords& lax, const PoleProfile& profile,
                                                            const TimeChart& chart, cx omega, cx g0) {
    std::vector<ConstraintViolation> out;
    const int ri = profile.r_inf;
    if (ri >= 3) return out;
    cx sr1{}, moment{}, s3{};
    for (int s = 0; s < profile.n(); ++s) {
        const auto& Q = lax.Q_fin[s];
        const auto& R = lax.R_fin[s];
        cx X = profile.poles[s].x;
        int r = profile.poles[s].r;
        sr1 += R[0];
        moment += X * R[0] + (r >= 2 ? R[1] : cx{});
        s3 += X * X * Q[0] + (r >= 2 ? 2.0 * X * Q[1] : cx{}) + (r >= 3 ? Q[2] : cx{});
    }
    out.push_back({"sum R_X,1 = -t_inf,0", std::abs(sr1 + chart.inf(0))});
    if (ri == 1) {
        cx beta = -g0 - chart.inf(0) / omega * s3;
        out.push_back({"sum X R_X,1 + R_X,2 = beta_-1", std::abs(moment - beta)});
    }
    return out;
}

}  // namespace laxforge
