// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/bench.hpp>
#include <uqd/encoder.hpp>
#include <uqd/engine.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

// Configuration problems are usage errors, not run failures.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        }
        catch (const std::logic_error&) {
            throw UsageError("bad seed '" + item + "'");
        }
    }
    if (out.empty())
        throw UsageError("--seeds needs at least one value");
    return out;
}

nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

void print_report(const uqd::ComparisonReport& report)
{
    for (const auto& v : report.variants)
        std::cout << fmt::format("{:<20} runs {:>3}  goal {:>3}  evals-to-goal median {:>9.0f} iqr {:>9.0f}  "
                                 "final fitness median {:.4f}\n",
                                 v.variant, v.runs - v.failed, v.reached_goal, v.evaluations_to_goal.median,
                                 v.evaluations_to_goal.iqr, v.final_fitness.median);
    for (const auto& c : report.comparisons)
        std::cout << fmt::format("{} vs {}: p {:.4g}  holm {:.4g}{}\n", c.first, c.second, c.p_raw, c.p_adjusted,
                                 c.significant ? "  *" : "");
    for (const auto& [variant, seed] : report.missing)
        std::cout << fmt::format("missing: {} seed {}\n", variant, seed);
}

struct Options {
    std::string config;
    std::string seeds;
    std::string out;
    std::string variant;
    std::size_t budget = 0;
};

int cmd_run(const Options& o)
{
    uqd::AlgorithmConfig cfg;
    try {
        cfg = uqd::AlgorithmConfig::preset(o.variant.empty() ? "aurora_xcon" : o.variant);
        if (!o.config.empty())
            cfg = uqd::AlgorithmConfig::from_json(read_json(o.config), cfg);
        if (o.budget > 0)
            cfg.total_evaluations = o.budget;
        if (!o.seeds.empty())
            cfg.seed = parse_seeds(o.seeds).front();
        cfg.validate();
    }
    catch (const uqd::Error& e) {
        throw UsageError(e.what());
    }
    const auto start = std::chrono::steady_clock::now();
    const auto result = uqd::run_algorithm(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    uqd::write_run_directory(o.out, result, wall);
    const auto record = uqd::make_record(result, wall);
    std::cout << fmt::format("{} seed {}: max fitness {} after {} evaluations", cfg.name, cfg.seed,
                             record.final_fitness(), result.counters.evaluations);
    if (record.evaluations_to_goal)
        std::cout << fmt::format(" (goal at {})", *record.evaluations_to_goal);
    std::cout << "\n";
    return kOk;
}

int cmd_compare(const Options& o)
{
    uqd::ExperimentConfig exp;
    try {
        exp = uqd::ExperimentConfig::from_json(read_json(o.config));
        if (!o.seeds.empty())
            exp.seeds = parse_seeds(o.seeds);
        for (auto& v : exp.variants) {
            if (o.budget > 0)
                v.total_evaluations = o.budget;
            v.validate();
        }
    }
    catch (const uqd::Error& e) {
        throw UsageError(e.what());
    }
    const auto result = uqd::run_experiment(exp, o.out, {.resume = true, .quiet = false});
    print_report(result.report);
    return result.report.missing.empty() ? kOk : kFailure;
}

int cmd_stats(const Options& o)
{
    if (!std::filesystem::is_directory(o.out))
        throw UsageError("no experiment directory at " + o.out);
    const auto records = uqd::load_experiment(o.out);
    if (records.empty())
        throw UsageError("no finished runs under " + o.out);
    const auto report = uqd::compare(records);
    uqd::write_report(o.out, records, report);
    print_report(report);
    return kOk;
}

int cmd_diagnose(const Options& o)
{
    const auto seeds = o.seeds.empty() ? std::vector<std::uint64_t>{0} : parse_seeds(o.seeds);
    nlohmann::json rows = nlohmann::json::array();
    std::size_t wins = 0;
    for (const auto seed : seeds) {
        const auto c = uqd::contrast_objectives(seed);
        wins += c.triplet_silhouette > c.mse_silhouette ? 1 : 0;
        std::cout << fmt::format("seed {}: silhouette mse {:.4f}  triplet {:.4f}\n", seed, c.mse_silhouette,
                                 c.triplet_silhouette);
        rows.push_back({{"seed", seed},
                        {"mse_silhouette", c.mse_silhouette},
                        {"triplet_silhouette", c.triplet_silhouette},
                        {"margin", c.margin},
                        {"mse_epochs", c.mse.loss_history.size()},
                        {"triplet_epochs", c.triplet.loss_history.size()}});
    }
    std::cout << fmt::format("triplet ahead in {} of {} seeds\n", wins, seeds.size());
    if (!o.out.empty()) {
        std::filesystem::create_directories(o.out);
        std::ofstream(std::filesystem::path(o.out) / "latent.json") << rows.dump(2) << "\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quality-diversity search with learned behaviour features"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Run one variant into a run directory");
    run->add_option("--variant", o.variant, "Preset name (default aurora_xcon)");
    run->add_option("--config", o.config, "JSON config applied on top of the preset")->check(CLI::ExistingFile);
    run->add_option("--seeds", o.seeds, "Seed (first value is used)");
    run->add_option("--budget", o.budget, "Total evaluations");
    run->add_option("--out", o.out, "Run directory")->required();

    auto* cmp = app.add_subcommand("compare", "Run a multi-variant experiment and compare");
    cmp->add_option("--config", o.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    cmp->add_option("--seeds", o.seeds, "Comma-separated seeds");
    cmp->add_option("--budget", o.budget, "Total evaluations per run");
    cmp->add_option("--out", o.out, "Experiment directory")->required();

    auto* stats = app.add_subcommand("stats", "Recompute report.json and curves.csv from run directories");
    stats->add_option("--out", o.out, "Experiment directory")->required();

    auto* diag = app.add_subcommand("diagnose-latent", "Latent structure of MSE vs triplet encoders on synthetic clusters");
    diag->add_option("--seeds", o.seeds, "Comma-separated seeds");
    diag->add_option("--out", o.out, "Directory for latent.json");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run)
            return cmd_run(o);
        if (*cmp)
            return cmd_compare(o);
        if (*stats)
            return cmd_stats(o);
        return cmd_diagnose(o);
    }
    catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kFailure;
    }
}
