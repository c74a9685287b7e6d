#pragma once

// Sample-budget planning: the least n whose confidence bound, evaluated at the
// idealized observation k = round(p n), stays within chi of p.

#include "irs/interval_stats.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace irs {

enum class PlanSide {
    /// p - lower(k, n) <= chi.
    Lower,
    /// upper(k, n) - p <= chi.
    Upper,
    /// upper(k, n) - lower(k, n) <= chi, both one-sided at alpha.
    Width,
};

std::string_view to_string(PlanSide side);
PlanSide parse_plan_side(std::string_view name);

struct PlanQuery {
    double p_true = 0.5;
    double chi = 0.005;
    stats::ConfidenceBoundSpec spec{};
    PlanSide side = PlanSide::Width;

    void validate() const;
};

struct PlanResult {
    std::uint64_t n_required = 0;
    /// Deviation at n_required; never above chi.
    double achieved_error = 0.0;
};

/// Deviation measured by `side` for n trials at the idealized observation.
double planning_error(const PlanQuery& q, std::uint64_t n);

/// Throws PlanningError when no n below 2^40 reaches chi.
PlanResult required_samples(const PlanQuery& q);

struct CurvePoint {
    stats::IntervalMethod method;
    double alpha;
    double chi;
    double p;
    std::uint64_t n_required;
};

std::vector<CurvePoint> sample_curve(stats::ConfidenceBoundSpec spec, std::span<const double> chi_list,
                                     std::span<const double> p_grid, PlanSide side = PlanSide::Width);

/// Header `method,alpha,chi,p,n_required`, one row per point.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

}  // namespace irs
