// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_BENCH_HPP
#define UQD_BENCH_HPP

#include <uqd/engine.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uqd {

struct CurvePoint {
    std::size_t evaluations = 0;
    double max_fitness = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

struct RunRecord {
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<CurvePoint> curve;
    std::optional<std::size_t> evaluations_to_goal;
    double wall_seconds = 0.0;
    std::size_t budget = 0;
    std::optional<std::string> error; // set when the run failed

    bool failed() const { return error.has_value(); }
    double final_fitness() const;
};

std::optional<std::size_t> evaluations_to_goal(std::span<const CurvePoint> curve);
RunRecord make_record(const RunResult& result, double wall_seconds);

struct Spread {
    double median = 0.0;
    double iqr = 0.0;
};

// Quartiles by linear interpolation between order statistics.
Spread median_iqr(std::vector<double> values);
double quantile(std::vector<double> values, double q);

/// Two-sided Wilcoxon rank-sum p-value with mid-ranks.
/// Exact permutation distribution when |xs| + |ys| <= kExactLimit,
/// normal approximation with tie and continuity correction otherwise.
inline constexpr std::size_t kExactLimit = 12;
double wilcoxon_rank_sum(std::span<const double> xs, std::span<const double> ys);
double wilcoxon_exact(std::span<const double> xs, std::span<const double> ys);
double wilcoxon_normal(std::span<const double> xs, std::span<const double> ys);

std::vector<double> holm_bonferroni(std::span<const double> ps);

struct VariantSummary {
    std::string variant;
    std::size_t runs = 0;
    std::size_t failed = 0;
    std::size_t reached_goal = 0;
    Spread evaluations_to_goal; // unreached runs count as budget + 1
    Spread final_fitness;
};

struct Comparison {
    std::string first;
    std::string second;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

struct ComparisonReport {
    std::vector<VariantSummary> variants;
    std::vector<Comparison> comparisons;
    std::vector<std::pair<std::string, std::uint64_t>> missing; // failed (variant, seed) cells
    double alpha = 0.05;

    const VariantSummary& summary(const std::string& variant) const;
    const Comparison& comparison(const std::string& a, const std::string& b) const;
    nlohmann::json to_json() const;
};

// Ranking metric per run: evaluations-to-goal, budget + 1 when the goal was never reached.
double goal_metric(const RunRecord& record);

ComparisonReport compare(std::span<const RunRecord> records, double alpha = 0.05);

std::string curves_csv(std::span<const RunRecord> records);
// (variant, seed) -> curve, in file order.
std::vector<RunRecord> parse_curves_csv(const std::string& text);

struct ExperimentConfig {
    std::vector<AlgorithmConfig> variants;
    std::vector<std::uint64_t> seeds;

    // {"variants": [name | {"preset": name, ...overrides}], "seeds": [...],
    //  "total_evaluations": N, "stop_on_goal": bool}; the last two apply to every variant.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
};

struct ExperimentOptions {
    bool resume = true;
    bool quiet = true;
};

struct ExperimentResult {
    std::vector<RunRecord> records;
    ComparisonReport report;
    std::size_t executed = 0; // runs actually computed (not resumed)
};

std::string run_directory(const std::string& out_dir, const std::string& variant, std::uint64_t seed);

/// Runs every (variant, seed) cell into out_dir/<variant>/seed_<s>/, then
/// writes out_dir/report.json and out_dir/curves.csv.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                const ExperimentOptions& options = {});

// Reads one finished run directory; nullopt when it is missing or incomplete.
std::optional<RunRecord> load_run_directory(const std::string& dir);

// Recomputes the report from every run directory under out_dir.
std::vector<RunRecord> load_experiment(const std::string& out_dir);
void write_report(const std::string& out_dir, std::span<const RunRecord> records, const ComparisonReport& report);

} // namespace uqd

#endif
