#ifndef DTREG_METRICS_HPP
#define DTREG_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dtreg/errors.hpp"
#include "dtreg/metrics_types.hpp"

namespace dtreg {

// Per-pair landmark distances plus summary statistics for one case.
// sd uses the n-1 divisor; it is the convention that matches the published
// aggregate rows this report format mirrors.
struct TREReport {
    std::vector<std::pair<std::string, double>> distances; // id -> mm
    double mean = 0.0;
    double min_d = 0.0;
    double max_d = 0.0;
    double sd = 0.0;
    std::vector<std::string> unmatched_fixed;
    std::vector<std::string> unmatched_moving;

    std::size_t pair_count() const { return distances.size(); }
};

namespace detail {

inline double sample_sd(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

} // namespace detail

// Euclidean distance per matched id; unmatched ids are listed, not errors.
inline TREReport tre(const LandmarkSet& fixed, const LandmarkSet& moving) {
    TREReport r;
    std::vector<double> ds;
    for (const auto& f : fixed.entries) {
        const Landmark* m = moving.find(f.id);
        if (!m) {
            r.unmatched_fixed.push_back(f.id);
            continue;
        }
        const double d = (f.position - m->position).norm();
        r.distances.emplace_back(f.id, d);
        ds.push_back(d);
    }
    for (const auto& m : moving.entries)
        if (!fixed.find(m.id)) r.unmatched_moving.push_back(m.id);
    if (ds.empty()) throw NoCommonLandmarks("tre: the sets share no landmark ids");
    r.min_d = *std::min_element(ds.begin(), ds.end());
    r.max_d = *std::max_element(ds.begin(), ds.end());
    double sum = 0.0;
    for (double d : ds) sum += d;
    r.mean = sum / static_cast<double>(ds.size());
    r.sd = detail::sample_sd(ds, r.mean);
    return r;
}

struct CaseRow {
    std::string label;
    std::size_t landmarks = 0;
    TREReport before;
    TREReport after;
};

namespace detail {

inline std::string format_cell(const TREReport& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f (%.2f - %.2f)", r.mean, r.min_d, r.max_d);
    return buf;
}

inline void append_padded(std::string& out, const std::string& s, std::size_t width) {
    out += s;
    if (s.size() < width) out.append(width - s.size(), ' ');
}

} // namespace detail

// Fixed-width per-case table with a trailing aggregate row. Aggregate
// mean +/- sd is computed over the case means (sd with n-1 divisor) and over
// the landmark counts (one decimal). Output is byte-stable for fixed input.
inline std::string format_report(std::span<const CaseRow> cases) {
    if (cases.empty()) throw DataError("format_report: at least one case required");
    constexpr std::size_t w_label = 10, w_marks = 12, w_cell = 24;
    std::string out;
    detail::append_padded(out, "Volume", w_label);
    detail::append_padded(out, "Landmarks", w_marks);
    detail::append_padded(out, "Before registration", w_cell);
    out += "After registration\n";

    std::vector<double> before_means, after_means, counts;
    for (const CaseRow& c : cases) {
        detail::append_padded(out, c.label, w_label);
        char marks[32];
        std::snprintf(marks, sizeof marks, "%zu", c.landmarks);
        detail::append_padded(out, marks, w_marks);
        detail::append_padded(out, detail::format_cell(c.before), w_cell);
        out += detail::format_cell(c.after);
        out += '\n';
        before_means.push_back(c.before.mean);
        after_means.push_back(c.after.mean);
        counts.push_back(static_cast<double>(c.landmarks));
    }

    auto mean_of = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    };
    const double mc = mean_of(counts), mb = mean_of(before_means), ma = mean_of(after_means);
    char agg[128];
    detail::append_padded(out, "Mean±sd", w_label + 1); // U+00B1 is two bytes
    std::snprintf(agg, sizeof agg, "%.1f±%.1f", mc, detail::sample_sd(counts, mc));
    detail::append_padded(out, agg, w_marks + 1);
    std::snprintf(agg, sizeof agg, "%.2f±%.2f", mb, detail::sample_sd(before_means, mb));
    detail::append_padded(out, agg, w_cell + 1);
    std::snprintf(agg, sizeof agg, "%.2f±%.2f", ma, detail::sample_sd(after_means, ma));
    out += agg;
    out += '\n';
    return out;
}

} // namespace dtreg

#endif
