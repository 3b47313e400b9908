#include "zonerl/metrics.hpp"

#include "zonerl/errors.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace zonerl {

namespace {

void require_nonempty(std::span<const double> xs, const char* who) {
    if (xs.empty()) throw DomainError(std::string(who) + ": empty trajectory");
}

double percent(std::size_t count, std::size_t total) {
    return 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

} // namespace

double time_in_range(std::span<const double> xs, double lo, double hi) {
    require_nonempty(xs, "time_in_range");
    std::size_t n = 0;
    for (double x : xs)
        if (x >= lo && x <= hi) ++n;
    return percent(n, xs.size());
}

AboveBelow time_above_below(std::span<const double> xs, double lo, double hi) {
    require_nonempty(xs, "time_above_below");
    std::size_t above = 0;
    std::size_t below = 0;
    for (double x : xs) {
        if (x > hi) ++above;
        if (x < lo) ++below;
    }
    return {percent(above, xs.size()), percent(below, xs.size())};
}

double aime(std::span<const double> xs, int steps_per_day, double threshold) {
    if (steps_per_day < 1) throw DomainError("aime: steps_per_day must be >= 1");
    if (xs.empty()) return 0.0;
    int events = 0;
    for (std::size_t t = 0; t < xs.size(); ++t)
        if (xs[t] < threshold && (t == 0 || xs[t - 1] >= threshold)) ++events;
    const double days = static_cast<double>(xs.size()) / steps_per_day;
    return events / days;
}

GlycemicSummary summarise(std::span<const double> xs, int steps_per_day, std::uint64_t seed) {
    GlycemicSummary s;
    s.tir = time_in_range(xs);
    const auto ab = time_above_below(xs);
    s.tar = ab.above;
    s.tbr = ab.below;
    s.mean_glucose = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    s.aime = aime(xs, steps_per_day);
    s.seeds = {seed};
    return s;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw DomainError("mean_std: no values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

ReportRow aggregate(const std::string& task, const std::string& model, std::span<const GlycemicSummary> runs) {
    if (runs.empty()) throw DomainError("aggregate: no runs");
    auto column = [&](double GlycemicSummary::*field) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.*field);
        return mean_std(v);
    };
    ReportRow row;
    row.task = task;
    row.model = model;
    row.tir = column(&GlycemicSummary::tir);
    row.tar = column(&GlycemicSummary::tar);
    row.tbr = column(&GlycemicSummary::tbr);
    row.mean_glucose = column(&GlycemicSummary::mean_glucose);
    row.aime = column(&GlycemicSummary::aime);
    for (const auto& r : runs) row.seeds.insert(row.seeds.end(), r.seeds.begin(), r.seeds.end());
    return row;
}

std::string format_mean_std(const MeanStd& v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v.mean << " ± " << v.std;
    return os.str();
}

void write_report_csv(std::ostream& os, std::span<const ReportRow> rows) {
    os << "Task,Model,TIR,TAR,TBR,MeanGlucose,AIME\n";
    for (const auto& r : rows) {
        os << r.task << ',' << r.model << ',' << format_mean_std(r.tir) << ',' << format_mean_std(r.tar) << ','
           << format_mean_std(r.tbr) << ',' << format_mean_std(r.mean_glucose) << ',' << format_mean_std(r.aime, 2)
           << '\n';
    }
}

nlohmann::json report_json(std::span<const ReportRow> rows) {
    auto ms = [](const MeanStd& v) { return nlohmann::json{{"mean", v.mean}, {"std", v.std}}; };
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"Task", r.task},
                         {"Model", r.model},
                         {"TIR", ms(r.tir)},
                         {"TAR", ms(r.tar)},
                         {"TBR", ms(r.tbr)},
                         {"MeanGlucose", ms(r.mean_glucose)},
                         {"AIME", ms(r.aime)},
                         {"ANIE", ms(r.aime)},
                         {"seeds", r.seeds}};
        for (const auto& [k, v] : r.extra.items()) j[k] = v;
        out.push_back(std::move(j));
    }
    return out;
}

void write_plot_csv(std::ostream& os, std::span<const SeedTrace> traces) {
    os << "step,seed,X\n" << std::setprecision(17);
    for (const auto& tr : traces)
        for (std::size_t t = 0; t < tr.xs.size(); ++t) os << t << ',' << tr.seed << ',' << tr.xs[t] << '\n';
}

} // namespace zonerl
