#include "irs/sample_planner.hpp"

#include "irs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace irs {

namespace {

constexpr std::uint64_t kMaxSamples = std::uint64_t{1} << 40;
constexpr std::uint64_t kScanWidth = 64;

}  // namespace

std::string_view to_string(PlanSide side) {
    switch (side) {
        case PlanSide::Lower: return "lower";
        case PlanSide::Upper: return "upper";
        case PlanSide::Width: return "width";
    }
    return "?";
}

PlanSide parse_plan_side(std::string_view name) {
    if (name == "lower") return PlanSide::Lower;
    if (name == "upper") return PlanSide::Upper;
    if (name == "width") return PlanSide::Width;
    throw DomainError("unknown plan side '" + std::string(name) + "' (expected lower, upper or width)");
}

void PlanQuery::validate() const {
    if (!(p_true >= 0.0 && p_true <= 1.0)) throw DomainError("p_true must lie in [0, 1]");
    if (!(chi > 0.0 && chi < 1.0)) throw DomainError("chi must lie in (0, 1)");
    spec.validate();
}

double planning_error(const PlanQuery& q, std::uint64_t n) {
    // nearbyint honours the default round-half-to-even mode.
    const double k_real = std::nearbyint(q.p_true * static_cast<double>(n));
    const auto k = static_cast<std::uint64_t>(std::max(0.0, k_real));
    const stats::BinomialSample s{std::min(k, n), n};
    switch (q.side) {
        case PlanSide::Lower: return q.p_true - stats::lower_confidence_bound(s, q.spec);
        case PlanSide::Upper: return stats::upper_confidence_bound(s, q.spec) - q.p_true;
        case PlanSide::Width:
            return stats::upper_confidence_bound(s, q.spec) - stats::lower_confidence_bound(s, q.spec);
    }
    return 0.0;
}

PlanResult required_samples(const PlanQuery& q) {
    q.validate();
    const auto ok = [&](std::uint64_t n) { return planning_error(q, n) <= q.chi; };

    std::uint64_t hi = 1;
    while (!ok(hi)) {
        if (hi >= kMaxSamples) {
            throw PlanningError("no sample count below 2^40 reaches chi = " + std::to_string(q.chi) +
                                " at p = " + std::to_string(q.p_true));
        }
        hi *= 2;
    }
    std::uint64_t lo = hi / 2;  // fails, or 0
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    // Rounding of k makes the error slightly non-monotone in n. Scan back in
    // windows until the n just below the answer fails.
    for (;;) {
        const std::uint64_t scan_from = hi > kScanWidth ? hi - kScanWidth : 1;
        std::uint64_t first = hi;
        for (std::uint64_t n = scan_from; n < hi; ++n) {
            if (ok(n)) {
                first = n;
                break;
            }
        }
        const bool edge = first == scan_from && scan_from > 1;
        hi = first;
        if (!edge) break;
    }
    return {hi, planning_error(q, hi)};
}

std::vector<CurvePoint> sample_curve(stats::ConfidenceBoundSpec spec, std::span<const double> chi_list,
                                     std::span<const double> p_grid, PlanSide side) {
    if (chi_list.empty() || p_grid.empty()) throw DomainError("sample curve needs nonempty chi and p grids");
    std::vector<CurvePoint> out;
    out.reserve(chi_list.size() * p_grid.size());
    for (double chi : chi_list) {
        for (double p : p_grid) {
            const auto r = required_samples({p, chi, spec, side});
            out.push_back({spec.method, spec.alpha, chi, p, r.n_required});
        }
    }
    return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
    out << "method,alpha,chi,p,n_required\n";
    for (const auto& pt : points) {
        out << stats::to_string(pt.method) << ',' << pt.alpha << ',' << pt.chi << ',' << pt.p << ','
            << pt.n_required << '\n';
    }
}

}  // namespace irs
