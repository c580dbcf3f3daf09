// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <uqd/engine.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace uqd;

namespace {

AlgorithmConfig small(const std::string& variant, std::size_t budget)
{
    auto c = AlgorithmConfig::preset(variant);
    c.total_evaluations = budget;
    c.seed = 3;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_monotone(const RunResult& r)
{
    for (std::size_t i = 1; i < r.metrics.size(); ++i) {
        CHECK(r.metrics[i].max_fitness >= r.metrics[i - 1].max_fitness);
        CHECK(r.metrics[i].evaluations > r.metrics[i - 1].evaluations);
    }
}

} // namespace

TEST_CASE("presets and variant gating flags")
{
    const auto plain = AlgorithmConfig::preset("aurora");
    CHECK_FALSE(plain.use_triplet);
    CHECK_FALSE(plain.use_extinction);
    const auto xcon = AlgorithmConfig::preset("aurora_xcon");
    CHECK(xcon.use_triplet);
    CHECK(xcon.use_extinction);
    CHECK(AlgorithmConfig::preset("aurora_x").use_extinction);
    CHECK_FALSE(AlgorithmConfig::preset("aurora_x").use_triplet);
    CHECK(AlgorithmConfig::preset("aurora_con").use_triplet);
    CHECK(AlgorithmConfig::preset("map_elites_laser").feature == FeatureKind::laser_mean);
    CHECK(xcon.extinction_period == 50);
    CHECK(xcon.extinction_proportion == 0.05);
    CHECK(xcon.encoder.train.learning_rate == 1e-2);
    CHECK(xcon.encoder.latent_dim == 10);
    for (const auto& name : AlgorithmConfig::preset_names())
        CHECK(AlgorithmConfig::preset(name).name == name);
    CHECK_THROWS_AS(AlgorithmConfig::preset("pga_me"), Error);
}

TEST_CASE("config json round trip and validation")
{
    auto c = AlgorithmConfig::preset("map_elites_bumper");
    c.seed = 77;
    c.encoder.margin_mode = MarginMode::plain;
    const auto back = AlgorithmConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());

    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"batchsize", 3}}), Error);
    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"encoder", {{"lr", 0.1}}}}), Error);
    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"batch_size", "many"}}), Error);
    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"extinction_proportion", 0.0}}), Error);
    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"total_evaluations", 10}}), Error);
    CHECK_THROWS_AS(AlgorithmConfig::from_json(nlohmann::json{{"env", "mars"}}), Error);

    const auto partial = AlgorithmConfig::from_json(nlohmann::json{{"batch_size", 32}}, AlgorithmConfig::preset("ga"));
    CHECK(partial.algorithm == AlgorithmKind::ga);
    CHECK(partial.batch_size == 32);
}

TEST_CASE("one-batch budgets")
{
    const auto ga = run_algorithm(small("ga", 64));
    CHECK(ga.counters.evaluations == 64);
    CHECK(ga.counters.iterations == 0);
    CHECK(ga.solutions.size() == 64);
    for (std::size_t i = 1; i < ga.solutions.size(); ++i)
        CHECK(ga.solutions[i - 1].fitness >= ga.solutions[i].fitness);

    const auto aurora = run_algorithm(small("aurora_xcon", 64));
    CHECK(aurora.counters.evaluations == 64);
    CHECK(aurora.solutions.size() == 64);
    CHECK(aurora.counters.triplet_trainings == 1);
    CHECK(aurora.counters.reencodings == 0);
    CHECK(aurora.counters.extinctions == 0);
    REQUIRE(aurora.metrics.size() == 1);
    CHECK(aurora.metrics[0].encoder_loss.has_value());
}

TEST_CASE("budget accounting")
{
    for (const std::string variant : {"ga", "map_elites_xy", "aurora"}) {
        const auto r = run_algorithm(small(variant, 1000));
        // Initial batch plus whole batches only.
        CHECK(r.counters.evaluations == 64 + 14 * 64);
        CHECK(r.counters.evaluations <= 1000);
        CHECK(r.metrics.size() == 15);
        CHECK(r.metrics.back().evaluations == r.counters.evaluations);
        check_monotone(r);
    }
}

TEST_CASE("variant gating counters")
{
    auto run = [](const std::string& v) {
        auto c = small(v, 64 * 121);
        c.encoder.train.max_epochs = 20;
        return run_algorithm(c);
    };
    const auto plain = run("aurora");
    CHECK(plain.counters.triplet_trainings == 0);
    CHECK(plain.counters.extinctions == 0);
    CHECK(plain.counters.mse_trainings == 1 + 4); // init + iterations 10, 30, 60, 100
    CHECK(plain.counters.reencodings == 4);

    const auto x = run("aurora_x");
    CHECK(x.counters.triplet_trainings == 0);
    CHECK(x.counters.extinctions == 2);

    const auto con = run("aurora_con");
    CHECK(con.counters.mse_trainings == 0);
    CHECK(con.counters.triplet_trainings == 5);
    CHECK(con.counters.extinctions == 0);

    const auto xcon = run("aurora_xcon");
    CHECK(xcon.counters.mse_trainings == 0);
    CHECK(xcon.counters.triplet_trainings == 5);
    CHECK(xcon.counters.extinctions == 2);
    check_monotone(xcon);
}

TEST_CASE("repertoire size right after an extinction")
{
    auto before = small("aurora_xcon", 64 * 50);
    before.encoder.train.max_epochs = 10;
    auto after = before;
    after.total_evaluations = 64 * 52;
    const auto r_before = run_algorithm(before); // stops at iteration 49
    const auto r_after = run_algorithm(after);   // iteration 50 has an extinction, then 51
    const std::size_t size_before = r_after.metrics[49].repertoire_size;
    CHECK(r_before.metrics.back().repertoire_size == size_before);
    CHECK(r_after.metrics[50].repertoire_size <= extinction_survivors(size_before + 64, 0.05));
    CHECK(r_after.metrics[51].repertoire_size <= extinction_survivors(size_before + 64, 0.05) + 64);
    CHECK(r_after.counters.extinctions == 1);
}

TEST_CASE("map-elites occupancy never shrinks")
{
    for (const std::string variant : {"map_elites_xy", "map_elites_random", "map_elites_bumper"}) {
        const auto r = run_algorithm(small(variant, 3000));
        for (std::size_t i = 1; i < r.metrics.size(); ++i)
            CHECK(r.metrics[i].repertoire_size >= r.metrics[i - 1].repertoire_size);
        CHECK(r.archive_kind == "grid");
        CHECK(r.random_feature.has_value() == (variant == "map_elites_random"));
    }
}

TEST_CASE("runs are deterministic")
{
    auto c = small("aurora_xcon", 64 * 12);
    c.encoder.train.max_epochs = 15;
    const auto a = run_algorithm(c);
    const auto b = run_algorithm(c);
    CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
    REQUIRE(a.tracker.history().size() == b.tracker.history().size());
    for (std::size_t i = 0; i < a.tracker.history().size(); ++i)
        CHECK(a.tracker.history()[i].max_fitness == b.tracker.history()[i].max_fitness);
    CHECK(a.encoder->params() == b.encoder->params());
}

TEST_CASE("point maze and recurrent encoder run end to end")
{
    auto c = small("aurora_xcon", 64 * 12);
    c.env = "point_maze";
    c.encoder.architecture = Architecture::recurrent;
    c.encoder.hidden = 16;
    c.encoder.train.max_epochs = 5;
    const auto r = run_algorithm(c);
    CHECK(r.encoder->shape().steps == 25);
    CHECK(r.encoder->shape().dims == 2);
    check_monotone(r);
}

TEST_CASE("stop on goal ends the run at the first solving batch")
{
    auto c = small("map_elites_xy", 60000);
    c.stop_on_goal = true;
    const auto r = run_algorithm(c);
    CHECK(r.tracker.max_fitness() == 0.0);
    CHECK(r.metrics.back().max_fitness == 0.0);
    CHECK(r.metrics[r.metrics.size() - 2].max_fitness < 0.0);
}

TEST_CASE("metrics csv round trip")
{
    std::vector<MetricRow> rows{{0, 64, -0.5, 64, 0.25}, {1, 128, -1.0 / 3.0, 100, std::nullopt}, {2, 192, 0.0, 7, 1e-17}};
    const auto text = metrics_csv(rows);
    const auto back = parse_metrics_csv(text);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].iteration == rows[i].iteration);
        CHECK(back[i].evaluations == rows[i].evaluations);
        CHECK(back[i].max_fitness == rows[i].max_fitness);
        CHECK(back[i].repertoire_size == rows[i].repertoire_size);
        CHECK(back[i].encoder_loss == rows[i].encoder_loss);
    }
    CHECK(metrics_csv(back) == text);
    CHECK_THROWS_AS(parse_metrics_csv("nope\n"), Error);
    CHECK_THROWS_AS(parse_metrics_csv("iteration,evaluations,max_fitness,repertoire_size,encoder_loss\n1,2\n"), Error);
}

TEST_CASE("run directory layout")
{
    const auto dir = std::filesystem::temp_directory_path() / "uqd_engine_run";
    std::filesystem::remove_all(dir);
    auto c = small("aurora_xcon", 64 * 3);
    c.encoder.train.max_epochs = 5;
    const auto r = run_algorithm(c);
    write_run_directory(dir.string(), r, 1.5);
    for (const char* f : {"config.json", "metrics.csv", "repertoire.snapshot", "encoder.ckpt", "meta.json"})
        CHECK(std::filesystem::exists(dir / f));
    const auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
    CHECK(meta.at("variant") == "aurora_xcon");
    CHECK(meta.at("seed") == 3);
    CHECK(meta.at("complete") == true);
    CHECK(AlgorithmConfig::from_json(nlohmann::json::parse(slurp(dir / "config.json"))).to_json() == c.to_json());
    CHECK(slurp(dir / "metrics.csv") == metrics_csv(r.metrics));
    const auto enc = EncoderModel::load((dir / "encoder.ckpt").string());
    CHECK(enc.params() == r.encoder->params());
    const auto [snap_meta, sols] = read_snapshot((dir / "repertoire.snapshot").string());
    CHECK(sols.size() == r.solutions.size());
    CHECK(snap_meta.evaluations == r.counters.evaluations);
    std::filesystem::remove_all(dir);

    const auto ga_dir = std::filesystem::temp_directory_path() / "uqd_engine_ga";
    write_run_directory(ga_dir.string(), run_algorithm(small("ga", 128)), 0.1);
    CHECK_FALSE(std::filesystem::exists(ga_dir / "encoder.ckpt"));
    std::filesystem::remove_all(ga_dir);
}
