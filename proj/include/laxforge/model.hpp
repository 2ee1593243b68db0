#pragma once

#include <complex>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace laxforge {

using cx = std::complex<double>;
using cvec = std::vector<cx>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedInput : Error {
    using Error::Error;
};
struct UnsupportedProfile : Error {
    using Error::Error;
};
struct NormalizationConflict : Error {
    using Error::Error;
};
struct DegenerateConfiguration : Error {
    using Error::Error;
};
struct SingularMatrix : Error {
    using Error::Error;
};
struct ChartError : Error {
    using Error::Error;
};

struct ExtendedPoint {
    bool infinite = false;
    cx x{};

    static ExtendedPoint inf() { return {true, {}}; }
    static ExtendedPoint at(cx a) { return {false, a}; }
};

struct FinitePole {
    cx x;
    int r = 1;
};

struct PoleProfile {
    int r_inf = 1;
    std::vector<FinitePole> poles;

    int n() const { return static_cast<int>(poles.size()); }
    int total_order() const;  // r = r_inf + sum r_s
};

// g = r_inf - 3 + sum r_s; throws UnsupportedProfile when g < 1.
int genus(const PoleProfile& profile);

// dim F = 4r - 7 counts gl_2 coefficients modulo conjugation. It splits as the sl_2 part
// 3(r-1) - 3 = 2g + (irregular times + monodromies) plus r-1 trace coefficients.
struct DimensionCount {
    int total = 0;         // 4r - 7
    int sl2_part = 0;      // 3r - 6
    int trace_part = 0;    // r - 1
    int symplectic = 0;    // 2g
    int times = 0;         // irregular times and monodromies, r
};
DimensionCount dimension_count(const PoleProfile& profile);

// pole == -1 means infinity; k == -1 means the position X_s.
struct TimeKey {
    int pole = -1;
    int k = 0;
    auto operator<=>(const TimeKey&) const = default;
};

std::string to_string(const TimeKey& key);

struct TimeChart {
    cvec t_inf;               // t_{inf,k}, k = 0..r_inf-1
    std::vector<cvec> t_fin;  // t_{X_s,k}, k = 0..r_s-1
    std::set<TimeKey> frozen;

    cx inf(int k) const { return k >= 0 && k < static_cast<int>(t_inf.size()) ? t_inf[k] : cx{}; }
    cx fin(int s, int k) const {
        return k >= 0 && k < static_cast<int>(t_fin[s].size()) ? t_fin[s][k] : cx{};
    }
};

// Zero-filled chart shaped for the profile.
TimeChart empty_chart(const PoleProfile& profile);

// Enforces the frozen values of the case. A raw zero on an entry frozen to 1 is read as
// "not supplied"; any other mismatch throws NormalizationConflict. Frozen positions are
// checked against the profile the same way.
TimeChart normalize(const PoleProfile& profile, const TimeChart& raw);
std::set<TimeKey> frozen_keys(const PoleProfile& profile);
PoleProfile normalize_positions(const PoleProfile& profile);

// Deformable directions (irregular times k >= 1 and positions) that are not frozen.
std::vector<TimeKey> free_directions(const PoleProfile& profile, const TimeChart& chart);

struct DeformationVector {
    std::map<TimeKey, cx> alpha;

    cx get(TimeKey key) const {
        auto it = alpha.find(key);
        return it == alpha.end() ? cx{} : it->second;
    }
    cx inf(int k) const { return get({-1, k}); }
    cx fin(int s, int k) const { return get({s, k}); }
    cx pos(int s) const { return get({s, -1}); }
    bool empty() const;
};

// Throws ChartError if alpha touches a frozen time.
void require_unfrozen(const DeformationVector& alpha, const TimeChart& chart);

// Move times/positions by h * alpha.
void shift_along(PoleProfile& profile, TimeChart& chart, const DeformationVector& alpha, cx h);

struct NormConstant {
    cx omega{1.0};
    cx g0{};
};

struct OperCoords {
    cvec q, p;
};

// Q_inf[k] = Q_{inf,k} for k = 0..r_inf-4; Q_fin[s][k-1] = Q_{X_s,k} for k = 1..r_s.
struct GeoCoords {
    cvec Q_inf, P_inf;
    std::vector<cvec> Q_fin, P_fin;
};

struct LaxCoords {
    cvec Q_inf, R_inf;
    std::vector<cvec> Q_fin, R_fin;
};

struct ConstraintViolation {
    std::string name;
    double residual = 0;
};

// Residuals of the chart constraints for r_inf <= 2 (empty for r_inf >= 3).
std::vector<ConstraintViolation> validate_chart_constraints(const GeoCoords& geo, const PoleProfile& profile,
                                                            cx omega);
std::vector<ConstraintViolation> validate_chart_constraints(const LaxCoords& lax, const PoleProfile& profile,
                                                            const TimeChart& chart, cx omega, cx g0);

}  // namespace laxforge
