// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/bench.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace uqd {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error("cannot write " + p.string());
    out << text;
}

// Twice the mid-rank of every pooled value (integers), xs first then ys.
std::vector<long> doubled_ranks(std::span<const double> xs, std::span<const double> ys)
{
    const std::size_t n = xs.size() + ys.size();
    std::vector<std::pair<double, std::size_t>> pooled;
    pooled.reserve(n);
    for (std::size_t i = 0; i < xs.size(); ++i)
        pooled.emplace_back(xs[i], i);
    for (std::size_t i = 0; i < ys.size(); ++i)
        pooled.emplace_back(ys[i], xs.size() + i);
    std::sort(pooled.begin(), pooled.end());
    std::vector<long> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[j + 1].first == pooled[i].first)
            ++j;
        const long doubled = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            ranks[pooled[k].second] = doubled;
        i = j + 1;
    }
    return ranks;
}

void check_samples(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.empty() || ys.empty())
        throw Error("wilcoxon_rank_sum: both samples must be non-empty");
    for (double v : xs)
        if (std::isnan(v))
            throw Error("wilcoxon_rank_sum: NaN sample");
    for (double v : ys)
        if (std::isnan(v))
            throw Error("wilcoxon_rank_sum: NaN sample");
}

double clamp_p(double p)
{
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

} // namespace

double RunRecord::final_fitness() const
{
    return curve.empty() ? -std::numeric_limits<double>::infinity() : curve.back().max_fitness;
}

std::optional<std::size_t> evaluations_to_goal(std::span<const CurvePoint> curve)
{
    for (const auto& p : curve)
        if (p.max_fitness >= 0.0)
            return p.evaluations;
    return std::nullopt;
}

RunRecord make_record(const RunResult& result, double wall_seconds)
{
    RunRecord r;
    r.variant = result.config.name;
    r.seed = result.config.seed;
    r.budget = result.config.total_evaluations;
    r.wall_seconds = wall_seconds;
    r.curve.reserve(result.metrics.size());
    for (const auto& m : result.metrics)
        r.curve.push_back({m.evaluations, m.max_fitness});
    r.evaluations_to_goal = evaluations_to_goal(r.curve);
    return r;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw Error("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Spread median_iqr(std::vector<double> values)
{
    if (values.empty())
        throw Error("median_iqr of an empty sample");
    return {quantile(values, 0.5), quantile(values, 0.75) - quantile(values, 0.25)};
}

double wilcoxon_exact(std::span<const double> xs, std::span<const double> ys)
{
    check_samples(xs, ys);
    const std::size_t n = xs.size();
    const std::size_t total = n + ys.size();
    const auto ranks = doubled_ranks(xs, ys);
    const long observed = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(n), 0L);
    const long centre = static_cast<long>(n * (total + 1)); // twice the null mean
    const long max_sum = static_cast<long>(total * (total + 1));

    // ways[k][s]: subsets of size k with doubled rank sum s.
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
        const auto r = static_cast<std::size_t>(ranks[i]);
        for (std::size_t k = std::min(n, i + 1); k >= 1; --k)
            for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s)
                ways[k][s] += ways[k - 1][s - r];
    }
    const long dev = std::labs(observed - centre);
    double extreme = 0.0;
    double all = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
        const double w = ways[n][static_cast<std::size_t>(s)];
        all += w;
        if (std::labs(s - centre) >= dev)
            extreme += w;
    }
    return clamp_p(extreme / all);
}

double wilcoxon_normal(std::span<const double> xs, std::span<const double> ys)
{
    check_samples(xs, ys);
    const auto n = static_cast<double>(xs.size());
    const auto m = static_cast<double>(ys.size());
    const double total = n + m;
    const auto ranks = doubled_ranks(xs, ys);
    double w = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        w += 0.5 * static_cast<double>(ranks[i]);

    std::map<long, double> ties;
    for (long r : ranks)
        ties[r] += 1.0;
    double tie_term = 0.0;
    for (const auto& [_, t] : ties)
        tie_term += t * t * t - t;

    const double mean = n * (total + 1.0) / 2.0;
    const double var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if (!(var > 0.0))
        return 1.0;
    const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
    return clamp_p(std::erfc(z / std::sqrt(2.0)));
}

double wilcoxon_rank_sum(std::span<const double> xs, std::span<const double> ys)
{
    return xs.size() + ys.size() <= kExactLimit ? wilcoxon_exact(xs, ys) : wilcoxon_normal(xs, ys);
}

std::vector<double> holm_bonferroni(std::span<const double> ps)
{
    for (double p : ps)
        if (!(p > 0.0 && p <= 1.0))
            throw Error("holm_bonferroni: p-values must lie in (0, 1]");
    const std::size_t m = ps.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ps[a] < ps[b]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        running = std::max(running, std::min(1.0, static_cast<double>(m - j) * ps[order[j]]));
        adjusted[order[j]] = running;
    }
    return adjusted;
}

double goal_metric(const RunRecord& record)
{
    return record.evaluations_to_goal ? static_cast<double>(*record.evaluations_to_goal)
                                      : static_cast<double>(record.budget + 1);
}

const VariantSummary& ComparisonReport::summary(const std::string& variant) const
{
    for (const auto& v : variants)
        if (v.variant == variant)
            return v;
    throw Error("report has no variant '" + variant + "'");
}

const Comparison& ComparisonReport::comparison(const std::string& a, const std::string& b) const
{
    for (const auto& c : comparisons)
        if ((c.first == a && c.second == b) || (c.first == b && c.second == a))
            return c;
    throw Error("report has no comparison " + a + " vs " + b);
}

nlohmann::json ComparisonReport::to_json() const
{
    nlohmann::json j;
    j["alpha"] = alpha;
    j["metric"] = "evaluations_to_goal";
    j["variants"] = nlohmann::json::array();
    for (const auto& v : variants)
        j["variants"].push_back({
            {"variant", v.variant},
            {"runs", v.runs},
            {"failed", v.failed},
            {"reached_goal", v.reached_goal},
            {"evaluations_to_goal", {{"median", v.evaluations_to_goal.median}, {"iqr", v.evaluations_to_goal.iqr}}},
            {"final_fitness", {{"median", v.final_fitness.median}, {"iqr", v.final_fitness.iqr}}},
        });
    j["comparisons"] = nlohmann::json::array();
    for (const auto& c : comparisons)
        j["comparisons"].push_back({{"first", c.first},
                                    {"second", c.second},
                                    {"p_raw", c.p_raw},
                                    {"p_adjusted", c.p_adjusted},
                                    {"significant", c.significant}});
    j["missing"] = nlohmann::json::array();
    for (const auto& [variant, seed] : missing)
        j["missing"].push_back({{"variant", variant}, {"seed", seed}});
    return j;
}

ComparisonReport compare(std::span<const RunRecord> records, double alpha)
{
    ComparisonReport report;
    report.alpha = alpha;
    std::vector<std::string> names;
    std::map<std::string, std::vector<const RunRecord*>> by_variant;
    for (const auto& r : records) {
        if (!by_variant.contains(r.variant))
            names.push_back(r.variant);
        by_variant[r.variant].push_back(&r);
    }

    std::map<std::string, std::vector<double>> metric;
    for (const auto& name : names) {
        VariantSummary s;
        s.variant = name;
        std::vector<double> fitness;
        for (const auto* r : by_variant[name]) {
            ++s.runs;
            if (r->failed()) {
                ++s.failed;
                report.missing.emplace_back(r->variant, r->seed);
                continue;
            }
            if (r->evaluations_to_goal)
                ++s.reached_goal;
            metric[name].push_back(goal_metric(*r));
            fitness.push_back(r->final_fitness());
        }
        if (!fitness.empty()) {
            s.evaluations_to_goal = median_iqr(metric[name]);
            s.final_fitness = median_iqr(fitness);
        }
        report.variants.push_back(s);
    }

    std::vector<double> raw;
    for (std::size_t a = 0; a < names.size(); ++a)
        for (std::size_t b = a + 1; b < names.size(); ++b) {
            Comparison c{names[a], names[b]};
            const auto& xs = metric[names[a]];
            const auto& ys = metric[names[b]];
            c.p_raw = xs.empty() || ys.empty() ? 1.0 : wilcoxon_rank_sum(xs, ys);
            raw.push_back(c.p_raw);
            report.comparisons.push_back(c);
        }
    const auto adjusted = holm_bonferroni(raw);
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
        report.comparisons[i].p_adjusted = adjusted[i];
        report.comparisons[i].significant = adjusted[i] < alpha;
    }
    return report;
}

std::string curves_csv(std::span<const RunRecord> records)
{
    std::string out = "variant,seed,evaluations,max_fitness\n";
    for (const auto& r : records)
        for (const auto& p : r.curve)
            out += fmt::format("{},{},{},{}\n", r.variant, r.seed, p.evaluations, p.max_fitness);
    return out;
}

std::vector<RunRecord> parse_curves_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "variant,seed,evaluations,max_fitness")
        throw Error("curves.csv: missing header");
    std::vector<RunRecord> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 4)
            throw Error("curves.csv: malformed row '" + line + "'");
        try {
            const std::uint64_t seed = std::stoull(cells[1]);
            if (out.empty() || out.back().variant != cells[0] || out.back().seed != seed) {
                out.emplace_back();
                out.back().variant = cells[0];
                out.back().seed = seed;
            }
            out.back().curve.push_back({std::stoull(cells[2]), std::stod(cells[3])});
        }
        catch (const std::logic_error&) {
            throw Error("curves.csv: malformed row '" + line + "'");
        }
    }
    for (auto& r : out)
        r.evaluations_to_goal = evaluations_to_goal(r.curve);
    return out;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw Error("experiment: expected a JSON object");
    const std::set<std::string> known{"variants", "seeds", "total_evaluations", "stop_on_goal"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key))
            throw Error("experiment: unknown key '" + key + "'");
    if (!j.contains("variants") || !j.at("variants").is_array() || j.at("variants").empty())
        throw Error("experiment: 'variants' must be a non-empty array");

    ExperimentConfig out;
    try {
        if (j.contains("seeds"))
            out.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(std::string("experiment: bad 'seeds': ") + e.what());
    }
    if (out.seeds.empty())
        out.seeds = {0};

    std::set<std::string> names;
    for (const auto& v : j.at("variants")) {
        AlgorithmConfig c;
        if (v.is_string()) {
            c = AlgorithmConfig::preset(v.get<std::string>());
        }
        else if (v.is_object()) {
            nlohmann::json overrides = v;
            AlgorithmConfig base;
            if (overrides.contains("preset")) {
                base = AlgorithmConfig::preset(overrides.at("preset").get<std::string>());
                overrides.erase("preset");
            }
            c = AlgorithmConfig::from_json(overrides, base);
        }
        else {
            throw Error("experiment: variants must be preset names or config objects");
        }
        if (j.contains("total_evaluations"))
            c.total_evaluations = j.at("total_evaluations").get<std::size_t>();
        if (j.contains("stop_on_goal"))
            c.stop_on_goal = j.at("stop_on_goal").get<bool>();
        c.validate();
        if (!names.insert(c.name).second)
            throw Error("experiment: duplicate variant name '" + c.name + "'");
        out.variants.push_back(c);
    }
    return out;
}

ExperimentConfig ExperimentConfig::load(const std::string& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    }
    catch (const nlohmann::json::parse_error& e) {
        throw Error(path + ": " + e.what());
    }
    return from_json(j);
}

std::string run_directory(const std::string& out_dir, const std::string& variant, std::uint64_t seed)
{
    return (fs::path(out_dir) / variant / ("seed_" + std::to_string(seed))).string();
}

std::optional<RunRecord> load_run_directory(const std::string& dir)
{
    const fs::path root(dir);
    if (!fs::exists(root / "meta.json") || !fs::exists(root / "metrics.csv"))
        return std::nullopt;
    const auto meta = nlohmann::json::parse(read_file(root / "meta.json"));
    if (!meta.value("complete", false))
        return std::nullopt;
    const auto config = nlohmann::json::parse(read_file(root / "config.json"));

    RunRecord r;
    r.variant = meta.at("variant").get<std::string>();
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.wall_seconds = meta.at("wall_time_seconds").get<double>();
    r.budget = config.at("total_evaluations").get<std::size_t>();
    for (const auto& m : parse_metrics_csv(read_file(root / "metrics.csv")))
        r.curve.push_back({m.evaluations, m.max_fitness});
    r.evaluations_to_goal = evaluations_to_goal(r.curve);
    return r;
}

std::vector<RunRecord> load_experiment(const std::string& out_dir)
{
    if (!fs::is_directory(out_dir))
        throw Error("no experiment directory at " + out_dir);
    std::vector<fs::path> dirs;
    for (const auto& variant : fs::directory_iterator(out_dir)) {
        if (!variant.is_directory())
            continue;
        for (const auto& run : fs::directory_iterator(variant.path()))
            if (run.is_directory() && run.path().filename().string().rfind("seed_", 0) == 0)
                dirs.push_back(run.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<RunRecord> out;
    for (const auto& d : dirs) {
        if (auto r = load_run_directory(d.string())) {
            out.push_back(std::move(*r));
            continue;
        }
        if (fs::exists(d / "error.txt")) {
            RunRecord failed;
            failed.variant = d.parent_path().filename().string();
            failed.seed = std::stoull(d.filename().string().substr(5));
            failed.error = read_file(d / "error.txt");
            out.push_back(std::move(failed));
        }
    }
    return out;
}

void write_report(const std::string& out_dir, std::span<const RunRecord> records, const ComparisonReport& report)
{
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "report.json", report.to_json().dump(2) + "\n");
    std::vector<RunRecord> ok;
    for (const auto& r : records)
        if (!r.failed())
            ok.push_back(r);
    write_file(fs::path(out_dir) / "curves.csv", curves_csv(ok));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                const ExperimentOptions& options)
{
    ExperimentResult result;
    for (const auto& variant : config.variants) {
        const auto task = make_task(variant);
        for (const auto seed : config.seeds) {
            const std::string dir = run_directory(out_dir, variant.name, seed);
            if (options.resume) {
                if (auto done = load_run_directory(dir)) {
                    result.records.push_back(std::move(*done));
                    continue;
                }
            }
            AlgorithmConfig cfg = variant;
            cfg.seed = seed;
            const auto start = std::chrono::steady_clock::now();
            try {
                fs::remove_all(dir);
                const RunResult run = run_algorithm(cfg, *task);
                const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                write_run_directory(dir, run, wall);
                result.records.push_back(make_record(run, wall));
                ++result.executed;
                if (!options.quiet)
                    std::cerr << fmt::format("{} seed {}: max fitness {} after {} evaluations ({:.1f}s)\n", cfg.name,
                                             seed, result.records.back().final_fitness(),
                                             run.counters.evaluations, wall);
            }
            catch (const std::exception& e) {
                RunRecord failed;
                failed.variant = cfg.name;
                failed.seed = seed;
                failed.budget = cfg.total_evaluations;
                failed.error = e.what();
                fs::create_directories(dir);
                write_file(fs::path(dir) / "error.txt", e.what());
                result.records.push_back(std::move(failed));
                ++result.executed;
                if (!options.quiet)
                    std::cerr << fmt::format("{} seed {}: failed: {}\n", cfg.name, seed, e.what());
            }
        }
    }
    result.report = compare(result.records);
    write_report(out_dir, result.records, result.report);
    return result;
}

} // namespace uqd
