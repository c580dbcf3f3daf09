// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_ENGINE_HPP
#define UQD_ENGINE_HPP

#include <uqd/core.hpp>
#include <uqd/encoder.hpp>
#include <uqd/env.hpp>
#include <uqd/repertoire.hpp>
#include <uqd/variation.hpp>

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace uqd {

enum class AlgorithmKind { ga, map_elites, aurora };

std::string to_string(AlgorithmKind a);
AlgorithmKind algorithm_from_string(const std::string& s);

struct EncoderConfig {
    TrainConfig train;
    std::size_t latent_dim = 10;
    std::size_t hidden = 64;
    Architecture architecture = Architecture::mlp;
    MarginMode margin_mode = MarginMode::scaled;
};

struct AlgorithmConfig {
    std::string name = "aurora_xcon";
    AlgorithmKind algorithm = AlgorithmKind::aurora;
    bool use_triplet = true;
    bool use_extinction = true;
    FeatureKind feature = FeatureKind::xy; // map_elites only

    std::size_t batch_size = 64;
    std::size_t total_evaluations = 100000;
    std::size_t capacity = 256;         // unstructured repertoire size
    std::size_t population_size = 1024; // GA truncation size
    std::size_t num_centroids = 1024;
    std::size_t extinction_period = 50;
    double extinction_proportion = 0.05;
    double iso_sigma = 0.2;
    double line_sigma = 0.0;
    double init_scale = 0.1;
    EncoderConfig encoder;

    std::uint64_t seed = 0;
    std::string env = "maze"; // "maze" or "point_maze"
    std::string maze_file;    // empty: bundled standard maze
    bool stop_on_goal = false; // end the run once max fitness reaches 0

    void validate() const;
    VariationParams variation() const { return {iso_sigma, line_sigma, batch_size}; }

    nlohmann::json to_json() const;
    // Applies the keys of `j` on top of `base`; unknown keys are rejected.
    static AlgorithmConfig from_json(const nlohmann::json& j, AlgorithmConfig base);
    static AlgorithmConfig from_json(const nlohmann::json& j);

    // ga, map_elites_{xy,bumper,laser,random}, aurora, aurora_x, aurora_con, aurora_xcon
    static AlgorithmConfig preset(const std::string& variant);
    static std::vector<std::string> preset_names();
};

std::unique_ptr<Task> make_task(const AlgorithmConfig& config);

struct MetricRow {
    std::size_t iteration = 0;
    std::size_t evaluations = 0;
    double max_fitness = 0.0;
    std::size_t repertoire_size = 0;
    std::optional<double> encoder_loss; // set on iterations that trained the encoder
};

struct RunCounters {
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    std::size_t mse_trainings = 0;
    std::size_t triplet_trainings = 0;
    std::size_t reencodings = 0;
    std::size_t extinctions = 0;
};

struct RunResult {
    AlgorithmConfig config;
    BestTracker tracker;
    std::vector<MetricRow> metrics;
    RunCounters counters;
    std::vector<Solution> solutions; // final population / archive contents
    std::string archive_kind;
    std::optional<EncoderModel> encoder;
    std::optional<RandomFeatureSpec> random_feature;
};

RunResult run_ga(const AlgorithmConfig& config, const Task& task);
RunResult run_map_elites(const AlgorithmConfig& config, const Task& task);
RunResult run_aurora(const AlgorithmConfig& config, const Task& task);
RunResult run_algorithm(const AlgorithmConfig& config, const Task& task);
RunResult run_algorithm(const AlgorithmConfig& config);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

/// Writes config.json, metrics.csv, repertoire.snapshot, meta.json and, for
/// AURORA variants, encoder.ckpt into `dir` (created if needed).
void write_run_directory(const std::string& dir, const RunResult& result, double wall_seconds);

} // namespace uqd

#endif
