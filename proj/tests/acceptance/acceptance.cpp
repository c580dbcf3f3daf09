// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Experiment runs resume from --out, so a second
// invocation only recomputes what is missing.

#include <uqd/bench.hpp>
#include <uqd/encoder.hpp>
#include <uqd/engine.hpp>
#include <uqd/repertoire.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace uqd;

namespace {

constexpr std::size_t kDeskBudget = 100000;
constexpr std::size_t kDeskSeeds = 10;
// Learned-vs-random needs more seeds than the rest for power after Holm.
constexpr std::size_t kFeatureSeeds = 20;
constexpr double kAlpha = 0.05;

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail)
{
    failures += pass ? 0 : 1;
    std::cout << fmt::format("{} {:>2} {}: {}", pass ? "PASS" : "FAIL", id, title, detail) << std::endl;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint64_t> seed_range(std::size_t n)
{
    std::vector<std::uint64_t> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = i;
    return out;
}

AlgorithmConfig desk_variant(const std::string& name)
{
    auto c = AlgorithmConfig::preset(name);
    c.total_evaluations = kDeskBudget;
    c.stop_on_goal = true;
    return c;
}

std::vector<const RunRecord*> of_variant(const std::vector<RunRecord>& records, const std::string& variant,
                                         std::size_t seeds)
{
    std::vector<const RunRecord*> out;
    for (const auto& r : records)
        if (r.variant == variant && r.seed < seeds && !r.failed())
            out.push_back(&r);
    return out;
}

double median_final(const std::vector<const RunRecord*>& runs)
{
    std::vector<double> v;
    for (const auto* r : runs)
        v.push_back(r->final_fitness());
    return median_iqr(v).median;
}

std::vector<double> goal_metrics(const std::vector<const RunRecord*>& runs)
{
    std::vector<double> v;
    for (const auto* r : runs)
        v.push_back(goal_metric(*r));
    return v;
}

std::size_t reached(const std::vector<const RunRecord*>& runs)
{
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const RunRecord* r) { return r->evaluations_to_goal.has_value(); }));
}

Solution make_solution(double fitness, Vector feature, double tag)
{
    Solution s;
    s.fitness = fitness;
    s.feature = std::move(feature);
    s.genotype.params = Vector::Constant(1, tag);
    s.trajectory.states = Matrix::Zero(1, 1);
    return s;
}

std::set<double> tags(const std::vector<Solution>& v)
{
    std::set<double> out;
    for (const auto& s : v)
        out.insert(s.genotype.params[0]);
    return out;
}

// Independent dominated-novelty filter: score each solution against every
// strictly fitter one, then take the top `capacity` by (score, fitness).
std::set<double> brute_force_keep(const std::vector<Solution>& pool, std::size_t capacity)
{
    const std::size_t n = pool.size();
    std::vector<std::pair<double, double>> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        double score = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (pool[j].fitness > pool[i].fitness)
                score = std::min(score, (pool[i].feature - pool[j].feature).norm());
        key[i] = {score, pool[i].fitness};
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    std::set<double> out;
    for (std::size_t i = 0; i < std::min(n, capacity); ++i)
        out.insert(pool[order[i]].genotype.params[0]);
    return out;
}

double enumerate_p(const std::vector<double>& xs, const std::vector<double>& ys)
{
    std::vector<double> pooled(xs);
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    const std::size_t n = pooled.size();
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        double below = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            below += pooled[j] < pooled[i];
            equal += pooled[j] == pooled[i];
        }
        rank[i] = below + (equal + 1.0) / 2.0;
    }
    const double mean = static_cast<double>(xs.size()) * (static_cast<double>(n) + 1.0) / 2.0;
    double observed = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        observed += rank[i];
    const double dev = std::abs(observed - mean);
    double hits = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != xs.size())
            continue;
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i))
                s += rank[i];
        total += 1;
        hits += std::abs(s - mean) >= dev - 1e-9;
    }
    return hits / total;
}

void check_metrics_monotone(const fs::path& root, std::size_t& files, std::vector<std::string>& bad)
{
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.path().filename() != "metrics.csv")
            continue;
        ++files;
        const auto rows = parse_metrics_csv(slurp(entry.path()));
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].max_fitness < rows[i - 1].max_fitness || rows[i].evaluations <= rows[i - 1].evaluations) {
                bad.push_back(entry.path().string());
                break;
            }
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    std::string out = "acceptance_runs";
    app.add_option("--out", out, "Directory for experiment runs (reused across invocations)");
    CLI11_PARSE(app, argc, argv);

    const auto start = std::chrono::steady_clock::now();
    const fs::path root(out);
    const fs::path desk_dir = root / "desk";

    // Learned-vs-random cells first; the desk experiment then resumes the
    // shared seeds and leaves its own report.json in place.
    ExperimentConfig features;
    for (const std::string v : {"aurora_con", "aurora_xcon", "map_elites_random"})
        features.variants.push_back(desk_variant(v));
    features.seeds = seed_range(kFeatureSeeds);
    const auto t0 = std::chrono::steady_clock::now();
    const auto feature_result = run_experiment(features, desk_dir.string());

    ExperimentConfig desk;
    for (const std::string v : {"ga", "map_elites_xy", "map_elites_laser", "map_elites_bumper", "map_elites_random",
                                "aurora_con", "aurora_xcon"})
        desk.variants.push_back(desk_variant(v));
    desk.seeds = seed_range(kDeskSeeds);
    const auto desk_result = run_experiment(desk, desk_dir.string());
    const double desk_minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::cout << fmt::format("experiments: {} runs computed, {} resumed, {:.1f} min", feature_result.executed + desk_result.executed,
                             feature_result.records.size() + desk_result.records.size() - feature_result.executed -
                                 desk_result.executed,
                             desk_minutes)
              << std::endl;
    for (const auto& [variant, seed] : desk_result.report.missing)
        std::cout << fmt::format("missing run: {} seed {}", variant, seed) << std::endl;
    for (const auto& [variant, seed] : feature_result.report.missing)
        std::cout << fmt::format("missing run: {} seed {}", variant, seed) << std::endl;

    const auto& recs = desk_result.records;
    const auto& frecs = feature_result.records;

    {
        const auto ga = of_variant(recs, "ga", kDeskSeeds);
        const auto xy = of_variant(recs, "map_elites_xy", kDeskSeeds);
        const auto xcon = of_variant(recs, "aurora_xcon", kDeskSeeds);
        const bool complete = ga.size() == kDeskSeeds && xy.size() == kDeskSeeds && xcon.size() == kDeskSeeds;
        const double m_ga = median_final(ga), m_xy = median_final(xy), m_xcon = median_final(xcon);
        report(1, complete && m_ga < 0.0 && m_xy == 0.0 && m_xcon == 0.0, "deceptiveness separation",
               fmt::format("median final fitness ga {:.4f} (goal {}/{}), map_elites_xy {:.4f}, aurora_xcon {:.4f}", m_ga,
                           reached(ga), ga.size(), m_xy, m_xcon));
    }

    {
        const auto xy = of_variant(recs, "map_elites_xy", kDeskSeeds);
        const auto laser = of_variant(recs, "map_elites_laser", kDeskSeeds);
        const auto bumper = of_variant(recs, "map_elites_bumper", kDeskSeeds);
        const bool complete = xy.size() == kDeskSeeds && laser.size() == kDeskSeeds && bumper.size() == kDeskSeeds;
        const double m_xy = median_iqr(goal_metrics(xy)).median, m_laser = median_iqr(goal_metrics(laser)).median;
        const std::size_t bumper_failed = bumper.size() - reached(bumper);
        report(2, complete && m_xy < m_laser && 2 * bumper_failed >= bumper.size(), "feature-quality ordering",
               fmt::format("median evals-to-goal xy {:.0f} < laser {:.0f}; bumper missed goal in {}/{}", m_xy, m_laser,
                           bumper_failed, bumper.size()));
    }

    {
        // Holm family: each AURORA objective against random features.
        const auto random = of_variant(frecs, "map_elites_random", kFeatureSeeds);
        const std::vector<std::string> learned{"aurora_con", "aurora_xcon"};
        std::vector<double> ps;
        std::vector<double> medians;
        bool complete = random.size() == kFeatureSeeds;
        for (const auto& v : learned) {
            const auto runs = of_variant(frecs, v, kFeatureSeeds);
            complete = complete && runs.size() == kFeatureSeeds;
            const auto a = goal_metrics(runs), b = goal_metrics(random);
            ps.push_back(wilcoxon_rank_sum(a, b));
            medians.push_back(median_iqr(a).median);
        }
        const auto adjusted = holm_bonferroni(ps);
        const double m_random = median_iqr(goal_metrics(random)).median;
        bool any = false;
        std::string detail = fmt::format("random median {:.0f} over {} seeds", m_random, random.size());
        for (std::size_t i = 0; i < learned.size(); ++i) {
            const bool ok = medians[i] < m_random && adjusted[i] < kAlpha;
            any = any || ok;
            detail += fmt::format("; {} median {:.0f} p {:.4g} holm {:.4g}", learned[i], medians[i], ps[i], adjusted[i]);
        }
        report(3, complete && any, "learned beats random features", detail);
    }

    {
        std::size_t wins = 0;
        std::string detail;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto c = contrast_objectives(seed);
            wins += c.triplet_silhouette > c.mse_silhouette ? 1 : 0;
        }
        detail = fmt::format("triplet silhouette above mse in {}/10 seeds", wins);
        report(4, wins >= 8, "latent-structure contrast", detail);
    }

    {
        double worst = 0.0;
        std::size_t params = 0;
        bool decoder_leak = false;
        RngStream rng(11);
        for (auto arch : {Architecture::mlp, Architecture::recurrent}) {
            EncoderShape shape;
            shape.steps = 3;
            shape.dims = 2;
            shape.hidden = 4;
            shape.latent = 3;
            shape.architecture = arch;
            EncoderModel model(shape, rng);
            params = std::max(params, model.param_count());
            Matrix in(7, 6), a(9, 6), p(9, 6), n(9, 6);
            for (Matrix* m : {&in, &a, &p, &n})
                for (Eigen::Index i = 0; i < m->size(); ++i)
                    m->data()[i] = rng.normal();
            const Matrix ea = model.encode_batch(a), ep = model.encode_batch(p), en = model.encode_batch(n);
            double margin = 0.0;
            for (Eigen::Index i = 0; i < 9; ++i)
                margin += std::abs((ea.row(i) - en.row(i)).norm() - (ea.row(i) - ep.row(i)).norm()) / 9.0;
            // The triplet loss never reaches the decoder, so its probes stay in
            // the encoder block and the decoder gradient must be exactly zero.
            const std::function<double(Vector*)> losses[] = {
                [&](Vector* g) { return model.reconstruction_loss(in, g); },
                [&](Vector* g) { return model.triplet_loss(a, p, n, margin, g); }};
            const std::size_t probe_range[] = {model.param_count(), model.encoder_param_count()};
            for (int which = 0; which < 2; ++which) {
                const auto& loss = losses[which];
                Vector grad = Vector::Zero(static_cast<Eigen::Index>(model.param_count()));
                loss(&grad);
                const auto decoder = static_cast<Eigen::Index>(model.param_count() - model.encoder_param_count());
                if (which == 1 && !grad.tail(decoder).isZero(0.0))
                    decoder_leak = true;
                for (int probe = 0; probe < 20; ++probe) {
                    const auto k = static_cast<Eigen::Index>(rng.index(probe_range[which]));
                    const double saved = model.params()[k];
                    const double h = 1e-6;
                    model.params()[k] = saved + h;
                    const double up = loss(nullptr);
                    model.params()[k] = saved - h;
                    const double down = loss(nullptr);
                    model.params()[k] = saved;
                    const double numeric = (up - down) / (2.0 * h);
                    const double scale = std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
                    worst = std::max(worst, std::abs(numeric - grad[k]) / scale);
                }
            }
        }
        report(5, worst < 1e-4 && params <= 200 && !decoder_leak, "gradient correctness",
               fmt::format("worst relative error {:.3g} over 80 probes, {} parameters, triplet decoder gradient {}", worst,
                           params, decoder_leak ? "non-zero" : "zero"));
    }

    {
        RngStream rng(12);
        std::size_t agree = 0;
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t pool_size = 1 + rng.index(8);
            const std::size_t members = rng.index(pool_size);
            const std::size_t capacity = 1 + rng.index(6);
            std::vector<Solution> pool;
            for (std::size_t i = 0; i < pool_size; ++i) {
                Vector f(2);
                f << std::floor(rng.uniform(0, 3)), rng.uniform();
                pool.push_back(make_solution(std::floor(rng.uniform(0, 4)), f, static_cast<double>(i)));
            }
            UnstructuredRepertoire rep(capacity);
            rep.add(std::vector<Solution>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(members)));
            auto merged = rep.solutions();
            std::vector<Solution> incoming(pool.begin() + static_cast<std::ptrdiff_t>(members), pool.end());
            merged.insert(merged.end(), incoming.begin(), incoming.end());
            const auto expected = brute_force_keep(merged, capacity);
            rep.add(std::move(incoming));
            agree += tags(rep.solutions()) == expected ? 1 : 0;
        }
        report(6, agree == 500, "replacement oracle", fmt::format("{}/500 pools match brute force", agree));
    }

    {
        RngStream rng(13);
        std::size_t count_ok = 0, best_ok = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = 1 + rng.index(400);
            UnstructuredRepertoire rep(n);
            std::vector<Solution> batch;
            for (std::size_t i = 0; i < n; ++i) {
                Vector f(1);
                f << static_cast<double>(i); // distinct features keep every member
                batch.push_back(make_solution(rng.normal(), f, static_cast<double>(i)));
            }
            rep.add(std::move(batch));
            const double best = rep.best().fitness;
            const std::size_t before = rep.size();
            rep.extinction(0.05, rng);
            const auto expected = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(before) + 0.5)));
            count_ok += rep.size() == expected ? 1 : 0;
            const auto& sols = rep.solutions();
            best_ok += std::any_of(sols.begin(), sols.end(), [&](const Solution& s) { return s.fitness == best; }) ? 1 : 0;
        }
        report(7, count_ok == 1000 && best_ok == 1000, "extinction contract",
               fmt::format("survivor count right in {}/1000, best kept in {}/1000", count_ok, best_ok));
    }

    {
        RngStream rng(14);
        std::size_t exact = 0;
        std::set<std::pair<std::size_t, std::size_t>> sizes;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t n = 1; n < 10; ++n)
            for (std::size_t m = 1; n + m <= 10; ++m)
                pairs.emplace_back(n, m);
        // Cycle through every size pair so each of the 45 appears at least twice.
        for (std::size_t trial = 0; trial < 100; ++trial) {
            const auto [n, m] = pairs[trial % pairs.size()];
            sizes.emplace(n, m);
            std::vector<double> xs(n), ys(m);
            for (auto& v : xs)
                v = std::floor(rng.uniform(0, 6));
            for (auto& v : ys)
                v = std::floor(rng.uniform(0, 6));
            exact += wilcoxon_rank_sum(xs, ys) == enumerate_p(xs, ys) ? 1 : 0;
        }
        const std::vector<double> h1{0.01, 0.04}, h2{0.3}, h3{0.5, 0.6, 0.7};
        const auto a1 = holm_bonferroni(h1), a2 = holm_bonferroni(h2), a3 = holm_bonferroni(h3);
        const bool holm_ok = std::abs(a1[0] - 0.02) < 1e-15 && a1[1] == 0.04 && a2[0] == 0.3 && a3[0] == 1.0 &&
                             a3[1] == 1.0 && a3[2] == 1.0;
        report(8, exact == 100 && holm_ok, "statistics oracles",
               fmt::format("wilcoxon equals enumeration in {}/100 ({} size pairs); holm examples {}", exact, sizes.size(),
                           holm_ok ? "match" : "differ"));
    }

    {
        auto c = desk_variant("aurora_xcon");
        c.seed = 0;
        const fs::path first = root / "determinism" / "first", second = root / "determinism" / "second";
        for (const auto& dir : {first, second}) {
            const auto t = std::chrono::steady_clock::now();
            const auto r = run_algorithm(c);
            write_run_directory(dir.string(), r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count());
        }
        const auto a = slurp(first / "metrics.csv"), b = slurp(second / "metrics.csv");
        const auto desk_copy = slurp(fs::path(run_directory(desk_dir.string(), "aurora_xcon", 0)) / "metrics.csv");
        report(9, !a.empty() && a == b && a == desk_copy, "determinism",
               fmt::format("metrics.csv {} bytes, reruns identical: {}, matches experiment run: {}", a.size(), a == b,
                           a == desk_copy));
    }

    {
        std::size_t files = 0;
        std::vector<std::string> bad;
        check_metrics_monotone(root, files, bad);
        report(10, files > 0 && bad.empty(), "elitism invariant",
               fmt::format("{} metrics.csv files, {} with a decreasing best", files, bad.size()));
        for (const auto& b : bad)
            std::cout << "  decreasing: " << b << std::endl;
    }

    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
    std::cout << fmt::format("{} of 10 criteria failed ({:.1f} min)", failures, minutes) << std::endl;
    return failures == 0 ? 0 : 1;
}
