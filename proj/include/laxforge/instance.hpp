#pragma once

#include <cstdint>
#include <random>

#include "laxforge/coords.hpp"

namespace laxforge {

struct Case {
    int r_inf = 3;
    std::vector<int> orders;

    std::string name() const;
};

struct Instance {
    PoleProfile profile;
    TimeChart chart;
    cx omega{1.0};
    OperCoords oper;
    GeoCoords geo;
};

// Seeded random draw: times on the annulus 0.5 <= |t| <= 2 (leading finite-pole times with
// Re > 0.25), free positions at mutual distance >= 0.5, q separated by >= 0.1 from each
// other and from the poles. Throws Error after 100 rejected draws.
Instance generate_instance(const Case& c, std::uint64_t seed);

// Draws only (q, p) for a fixed profile and raw chart (normalized here).
Instance instance_for(const PoleProfile& profile, const TimeChart& raw, cx omega, std::uint64_t seed);
// Replaces inst.oper and inst.geo by a fresh (q, p) draw; false when the separation guards fail.
bool draw_qp(std::mt19937_64& rng, Instance& inst);
Case case_of(const PoleProfile& profile);

cx random_annulus(std::mt19937_64& rng, double lo = 0.5, double hi = 2.0);

}  // namespace laxforge
