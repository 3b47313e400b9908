#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace zonerl {

inline constexpr double kRangeLow = 70.0;
inline constexpr double kRangeHigh = 180.0;
inline constexpr double kSevereHypo = 40.0;

/// Percent of samples with lo <= X <= hi. Throws DomainError on an empty trajectory.
double time_in_range(std::span<const double> xs, double lo = kRangeLow, double hi = kRangeHigh);

struct AboveBelow {
    double above = 0.0; // percent with X > hi
    double below = 0.0; // percent with X < lo
};

AboveBelow time_above_below(std::span<const double> xs, double lo = kRangeLow, double hi = kRangeHigh);

/// Severe events per day: entries into the region X < threshold.
double aime(std::span<const double> xs, int steps_per_day, double threshold = kSevereHypo);

struct GlycemicSummary {
    double tir = 0.0;
    double tar = 0.0;
    double tbr = 0.0;
    double mean_glucose = 0.0;
    double aime = 0.0;
    int episodes = 1;
    std::vector<std::uint64_t> seeds;
};

GlycemicSummary summarise(std::span<const double> xs, int steps_per_day, std::uint64_t seed);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// One report row in the column order Task, Model, TIR, TAR, TBR, MeanGlucose, AIME.
struct ReportRow {
    std::string task;
    std::string model;
    MeanStd tir;
    MeanStd tar;
    MeanStd tbr;
    MeanStd mean_glucose;
    MeanStd aime;
    std::vector<std::uint64_t> seeds;
    nlohmann::json extra = nlohmann::json::object(); // command-specific fields (budget, setting, ...)
};

ReportRow aggregate(const std::string& task, const std::string& model, std::span<const GlycemicSummary> runs);

/// "86.5 ± 2.7"
std::string format_mean_std(const MeanStd& v, int precision = 1);

void write_report_csv(std::ostream& os, std::span<const ReportRow> rows);
/// Numeric mean/std per metric; the severe-event metric also appears as "ANIE".
nlohmann::json report_json(std::span<const ReportRow> rows);

/// Long-format (step, seed, X) table for external plotting.
struct SeedTrace {
    std::uint64_t seed = 0;
    std::vector<double> xs;
};

void write_plot_csv(std::ostream& os, std::span<const SeedTrace> traces);

} // namespace zonerl
