// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/engine.hpp>
#include <uqd/kernels.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace uqd {

namespace {

// Stream ids of the per-run RNG tree.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kEncoderInitStream = 1;
constexpr std::uint64_t kCentroidStream = 2;
constexpr std::uint64_t kRandomFeatureStream = 3;
constexpr std::uint64_t kFirstIterationStream = 16;

constexpr std::size_t kRandomFeatureProbes = 256;
constexpr double kRandomFeatureProbeScale = 1.0;

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where)
{
    if (!j.is_object())
        throw Error(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key))
            throw Error(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

std::vector<Genotype> random_genotypes(std::size_t count, std::size_t dim, double scale, RngStream rng)
{
    std::vector<Genotype> out(count);
    for (auto& g : out) {
        g.params.resize(static_cast<Eigen::Index>(dim));
        for (Eigen::Index i = 0; i < g.params.size(); ++i)
            g.params[i] = scale * rng.normal();
    }
    return out;
}

std::vector<Genotype> make_offspring(const std::vector<const Genotype*>& parents, const AlgorithmConfig& cfg,
                                     const RngStream& it_rng)
{
    RngStream select_rng = it_rng.child(0);
    const auto pairs = select_uniform(parents.size(), cfg.batch_size, select_rng);
    std::vector<Genotype> out(pairs.size());
    const auto var = cfg.variation();
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        RngStream r = it_rng.child(1 + j);
        out[j] = iso_line_dd(*parents[pairs[j].first], *parents[pairs[j].second], var, r);
    }
    return out;
}

std::vector<Solution> to_solutions(std::vector<Genotype>& genotypes, std::vector<EpisodeResult>& results)
{
    std::vector<Solution> out(genotypes.size());
    for (std::size_t i = 0; i < genotypes.size(); ++i) {
        if (!std::isfinite(results[i].fitness))
            throw NumericError("evaluation produced a non-finite fitness");
        out[i].genotype = std::move(genotypes[i]);
        out[i].fitness = results[i].fitness;
        out[i].trajectory = std::move(results[i].trajectory);
    }
    return out;
}

bool goal_reached(const BestTracker& tracker)
{
    return tracker.has_best() && tracker.max_fitness() >= 0.0;
}

class RunLoop {
public:
    RunLoop(const AlgorithmConfig& cfg) : cfg_(cfg)
    {
        cfg_.validate();
        result_.config = cfg_;
    }

    bool budget_left() const { return result_.counters.evaluations + cfg_.batch_size <= cfg_.total_evaluations; }

    bool should_stop() const { return cfg_.stop_on_goal && goal_reached(result_.tracker); }

    void count_batch(std::size_t n) { result_.counters.evaluations += n; }

    void observe(const std::vector<Solution>& batch)
    {
        for (const auto& s : batch)
            result_.tracker.observe(s);
    }

    void record(std::size_t iteration, std::size_t size, std::optional<double> loss = std::nullopt)
    {
        result_.tracker.record(result_.counters.evaluations);
        result_.metrics.push_back({iteration, result_.counters.evaluations, result_.tracker.max_fitness(), size, loss});
    }

    RunResult& result() { return result_; }

private:
    AlgorithmConfig cfg_;
    RunResult result_;
};

// Trains on the current repertoire; returns the final epoch loss.
double train_encoder(EncoderModel& model, const AlgorithmConfig& cfg, const std::vector<Solution>& members,
                     const std::vector<Vector>& features, RunCounters& counters, RngStream rng)
{
    std::vector<const StateTrajectory*> trajectories;
    trajectories.reserve(members.size());
    for (const auto& s : members)
        trajectories.push_back(&s.trajectory);

    if (!cfg.use_triplet) {
        ++counters.mse_trainings;
        RngStream train_rng = rng.child(0);
        return train_reconstruction(model, flatten(trajectories), cfg.encoder.train, train_rng).final_loss();
    }

    ++counters.triplet_trainings;
    std::vector<double> fitness;
    fitness.reserve(members.size());
    for (const auto& s : members)
        fitness.push_back(s.fitness);
    RngStream mine_rng = rng.child(1);
    const auto triplets = mine_triplets(fitness, mine_rng);
    const double margin = adaptive_margin(features, cfg.encoder.latent_dim, cfg.encoder.margin_mode);
    const TripletSet data = make_triplet_set(trajectories, triplets, margin);
    RngStream train_rng = rng.child(0);
    return train_triplet(model, data, cfg.encoder.train, train_rng).final_loss();
}

std::vector<Vector> encode_all(const EncoderModel& model, const std::vector<Solution>& batch)
{
    std::vector<const StateTrajectory*> trajectories;
    trajectories.reserve(batch.size());
    for (const auto& s : batch)
        trajectories.push_back(&s.trajectory);
    return kernels::parallel::map_trajectories(trajectories,
                                               [&](const StateTrajectory& t) { return model.encode(t); });
}

} // namespace

std::string to_string(AlgorithmKind a)
{
    switch (a) {
    case AlgorithmKind::ga:
        return "ga";
    case AlgorithmKind::map_elites:
        return "map_elites";
    case AlgorithmKind::aurora:
        return "aurora";
    }
    return "?";
}

AlgorithmKind algorithm_from_string(const std::string& s)
{
    if (s == "ga")
        return AlgorithmKind::ga;
    if (s == "map_elites")
        return AlgorithmKind::map_elites;
    if (s == "aurora")
        return AlgorithmKind::aurora;
    throw Error("unknown algorithm '" + s + "'");
}

void AlgorithmConfig::validate() const
{
    if (batch_size == 0)
        throw Error("config: batch_size must be positive");
    if (total_evaluations < batch_size)
        throw Error("config: total_evaluations must cover at least one batch");
    if (capacity == 0 || num_centroids == 0 || population_size == 0)
        throw Error("config: capacity, population_size and num_centroids must be positive");
    if (extinction_period == 0)
        throw Error("config: extinction_period must be positive");
    if (!(extinction_proportion > 0.0 && extinction_proportion <= 1.0))
        throw Error("config: extinction_proportion must be in (0, 1]");
    if (!(iso_sigma >= 0.0) || !(line_sigma >= 0.0) || !(init_scale >= 0.0))
        throw Error("config: variation scales must be non-negative");
    if (encoder.latent_dim == 0 || encoder.hidden == 0)
        throw Error("config: encoder dimensions must be positive");
    if (encoder.train.batch_size == 0 || !(encoder.train.learning_rate > 0.0) || encoder.train.base_interval == 0)
        throw Error("config: encoder training parameters must be positive");
    if (env != "maze" && env != "point_maze")
        throw Error("config: env must be 'maze' or 'point_maze'");
    if (env == "point_maze" && algorithm == AlgorithmKind::map_elites
        && (feature == FeatureKind::bumper || feature == FeatureKind::laser_mean))
        throw Error("config: sensor features need the maze environment");
    if (algorithm == AlgorithmKind::aurora && use_triplet && capacity < 3)
        throw Error("config: triplet training needs a repertoire capacity of at least 3");
}

nlohmann::json AlgorithmConfig::to_json() const
{
    return {
        {"name", name},
        {"algorithm", to_string(algorithm)},
        {"use_triplet", use_triplet},
        {"use_extinction", use_extinction},
        {"feature", to_string(feature)},
        {"batch_size", batch_size},
        {"total_evaluations", total_evaluations},
        {"capacity", capacity},
        {"population_size", population_size},
        {"num_centroids", num_centroids},
        {"extinction_period", extinction_period},
        {"extinction_proportion", extinction_proportion},
        {"iso_sigma", iso_sigma},
        {"line_sigma", line_sigma},
        {"init_scale", init_scale},
        {"encoder",
         {{"learning_rate", encoder.train.learning_rate},
          {"batch_size", encoder.train.batch_size},
          {"max_epochs", encoder.train.max_epochs},
          {"early_stop_delta", encoder.train.early_stop_delta},
          {"patience", encoder.train.patience},
          {"base_interval", encoder.train.base_interval},
          {"latent_dim", encoder.latent_dim},
          {"hidden", encoder.hidden},
          {"architecture", to_string(encoder.architecture)},
          {"margin_mode", to_string(encoder.margin_mode)}}},
        {"seed", seed},
        {"env", env},
        {"maze_file", maze_file},
        {"stop_on_goal", stop_on_goal},
    };
}

AlgorithmConfig AlgorithmConfig::from_json(const nlohmann::json& j, AlgorithmConfig base)
{
    reject_unknown(j,
                   {"name", "algorithm", "use_triplet", "use_extinction", "feature", "batch_size", "total_evaluations",
                    "capacity", "population_size", "num_centroids", "extinction_period", "extinction_proportion", "iso_sigma", "line_sigma",
                    "init_scale", "encoder", "seed", "env", "maze_file", "stop_on_goal"},
                   "config");
    AlgorithmConfig c = std::move(base);
    read_key(j, "name", c.name);
    if (j.contains("algorithm"))
        c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    read_key(j, "use_triplet", c.use_triplet);
    read_key(j, "use_extinction", c.use_extinction);
    if (j.contains("feature"))
        c.feature = feature_kind_from_string(j.at("feature").get<std::string>());
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "total_evaluations", c.total_evaluations);
    read_key(j, "capacity", c.capacity);
    read_key(j, "population_size", c.population_size);
    read_key(j, "num_centroids", c.num_centroids);
    read_key(j, "extinction_period", c.extinction_period);
    read_key(j, "extinction_proportion", c.extinction_proportion);
    read_key(j, "iso_sigma", c.iso_sigma);
    read_key(j, "line_sigma", c.line_sigma);
    read_key(j, "init_scale", c.init_scale);
    read_key(j, "seed", c.seed);
    read_key(j, "env", c.env);
    read_key(j, "maze_file", c.maze_file);
    read_key(j, "stop_on_goal", c.stop_on_goal);
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        reject_unknown(e,
                       {"learning_rate", "batch_size", "max_epochs", "early_stop_delta", "patience", "base_interval",
                        "latent_dim", "hidden", "architecture", "margin_mode"},
                       "config.encoder");
        read_key(e, "learning_rate", c.encoder.train.learning_rate);
        read_key(e, "batch_size", c.encoder.train.batch_size);
        read_key(e, "max_epochs", c.encoder.train.max_epochs);
        read_key(e, "early_stop_delta", c.encoder.train.early_stop_delta);
        read_key(e, "patience", c.encoder.train.patience);
        read_key(e, "base_interval", c.encoder.train.base_interval);
        read_key(e, "latent_dim", c.encoder.latent_dim);
        read_key(e, "hidden", c.encoder.hidden);
        if (e.contains("architecture"))
            c.encoder.architecture = architecture_from_string(e.at("architecture").get<std::string>());
        if (e.contains("margin_mode"))
            c.encoder.margin_mode = margin_mode_from_string(e.at("margin_mode").get<std::string>());
    }
    c.validate();
    return c;
}

AlgorithmConfig AlgorithmConfig::from_json(const nlohmann::json& j)
{
    return from_json(j, AlgorithmConfig{});
}

std::vector<std::string> AlgorithmConfig::preset_names()
{
    return {"ga", "map_elites_xy", "map_elites_bumper", "map_elites_laser", "map_elites_random",
            "aurora", "aurora_x", "aurora_con", "aurora_xcon"};
}

AlgorithmConfig AlgorithmConfig::preset(const std::string& variant)
{
    AlgorithmConfig c;
    c.name = variant;
    if (variant == "ga") {
        c.algorithm = AlgorithmKind::ga;
    }
    else if (variant.rfind("map_elites", 0) == 0) {
        c.algorithm = AlgorithmKind::map_elites;
        if (variant == "map_elites" || variant == "map_elites_xy")
            c.feature = FeatureKind::xy;
        else if (variant == "map_elites_bumper")
            c.feature = FeatureKind::bumper;
        else if (variant == "map_elites_laser")
            c.feature = FeatureKind::laser_mean;
        else if (variant == "map_elites_random")
            c.feature = FeatureKind::random_dims;
        else
            throw Error("unknown variant '" + variant + "'");
    }
    else if (variant == "aurora" || variant == "aurora_x" || variant == "aurora_con" || variant == "aurora_xcon") {
        c.algorithm = AlgorithmKind::aurora;
        c.use_triplet = variant == "aurora_con" || variant == "aurora_xcon";
        c.use_extinction = variant == "aurora_x" || variant == "aurora_xcon";
    }
    else {
        throw Error("unknown variant '" + variant + "'");
    }
    return c;
}

std::unique_ptr<Task> make_task(const AlgorithmConfig& config)
{
    if (config.env == "point_maze")
        return std::make_unique<PointMazeTask>();
    if (config.env != "maze")
        throw Error("unknown env '" + config.env + "'");
    return std::make_unique<MazeTask>(config.maze_file.empty() ? MazeWorld::standard() : MazeWorld::load(config.maze_file));
}

RunResult run_ga(const AlgorithmConfig& config, const Task& task)
{
    RunLoop loop(config);
    const RngStream rng(config.seed);

    auto genotypes = random_genotypes(config.batch_size, task.genotype_size(), config.init_scale, rng.child(kInitStream));
    auto results = kernels::parallel::evaluate_batch(task, genotypes);
    std::vector<Solution> population = to_solutions(genotypes, results);
    loop.count_batch(population.size());
    loop.observe(population);

    auto truncate = [&](std::vector<Solution>& pop) {
        std::stable_sort(pop.begin(), pop.end(), [](const Solution& a, const Solution& b) { return a.fitness > b.fitness; });
        if (pop.size() > config.population_size)
            pop.resize(config.population_size);
    };
    truncate(population);
    loop.record(0, population.size());

    std::size_t iteration = 0;
    while (loop.budget_left() && !loop.should_stop()) {
        ++iteration;
        std::vector<const Genotype*> parents;
        parents.reserve(population.size());
        for (const auto& s : population)
            parents.push_back(&s.genotype);
        auto children = make_offspring(parents, config, rng.child(kFirstIterationStream + iteration));
        auto child_results = kernels::parallel::evaluate_batch(task, children);
        auto batch = to_solutions(children, child_results);
        loop.count_batch(batch.size());
        loop.observe(batch);
        for (auto& s : batch)
            population.push_back(std::move(s));
        truncate(population);
        loop.record(iteration, population.size());
    }

    RunResult& out = loop.result();
    out.counters.iterations = iteration;
    out.solutions = std::move(population);
    out.archive_kind = "population";
    return std::move(out);
}

RunResult run_map_elites(const AlgorithmConfig& config, const Task& task)
{
    RunLoop loop(config);
    const RngStream rng(config.seed);

    const std::size_t dims = feature_dim(config.feature);
    RngStream centroid_rng = rng.child(kCentroidStream);
    GridRepertoire grid(cvt_centroids(config.num_centroids, dims, Bounds::unit(dims), centroid_rng), Bounds::unit(dims));

    std::optional<RandomFeatureSpec> spec;
    if (config.feature == FeatureKind::random_dims) {
        RngStream feature_rng = rng.child(kRandomFeatureStream);
        spec = RandomFeatureSpec::sample(task.trajectory_steps(), task.trajectory_dims(), feature_rng);
        // Calibration probes are setup cost and do not count against the budget.
        auto probes = random_genotypes(kRandomFeatureProbes, task.genotype_size(), kRandomFeatureProbeScale,
                                       feature_rng.child(0));
        auto probe_results = kernels::parallel::evaluate_batch(task, probes);
        std::vector<StateTrajectory> samples;
        samples.reserve(probe_results.size());
        for (auto& r : probe_results)
            samples.push_back(std::move(r.trajectory));
        spec->calibrate(samples);
    }
    const RandomFeatureSpec* spec_ptr = spec ? &*spec : nullptr;

    auto insert_batch = [&](std::vector<Genotype>& genotypes) {
        auto results = kernels::parallel::evaluate_batch(task, genotypes);
        std::vector<Vector> features(results.size());
        for (std::size_t i = 0; i < results.size(); ++i)
            features[i] = extract_feature(results[i], config.feature, spec_ptr);
        auto batch = to_solutions(genotypes, results);
        for (std::size_t i = 0; i < batch.size(); ++i)
            batch[i].feature = std::move(features[i]);
        loop.count_batch(batch.size());
        loop.observe(batch);
        for (auto& s : batch)
            grid.add(std::move(s));
    };

    auto genotypes = random_genotypes(config.batch_size, task.genotype_size(), config.init_scale, rng.child(kInitStream));
    insert_batch(genotypes);
    loop.record(0, grid.size());

    std::size_t iteration = 0;
    while (loop.budget_left() && !loop.should_stop()) {
        ++iteration;
        std::vector<const Genotype*> parents;
        for (const auto* s : grid.solutions())
            parents.push_back(&s->genotype);
        auto children = make_offspring(parents, config, rng.child(kFirstIterationStream + iteration));
        insert_batch(children);
        loop.record(iteration, grid.size());
    }

    RunResult& out = loop.result();
    out.counters.iterations = iteration;
    for (const auto* s : grid.solutions())
        out.solutions.push_back(*s);
    out.archive_kind = "grid";
    out.random_feature = spec;
    return std::move(out);
}

RunResult run_aurora(const AlgorithmConfig& config, const Task& task)
{
    RunLoop loop(config);
    const RngStream rng(config.seed);
    RunCounters counters;

    EncoderShape shape;
    shape.steps = task.trajectory_steps();
    shape.dims = task.trajectory_dims();
    shape.hidden = config.encoder.hidden;
    shape.latent = config.encoder.latent_dim;
    shape.architecture = config.encoder.architecture;
    RngStream encoder_rng = rng.child(kEncoderInitStream);
    EncoderModel model(shape, encoder_rng);
    UnstructuredRepertoire repertoire(config.capacity);
    const UpdateSchedule schedule(config.encoder.train.base_interval);

    auto evaluate = [&](std::vector<Genotype>& genotypes) {
        auto results = kernels::parallel::evaluate_batch(task, genotypes);
        auto batch = to_solutions(genotypes, results);
        loop.count_batch(batch.size());
        loop.observe(batch);
        return batch;
    };

    // Initial batch: the encoder gets a first training pass on it before the loop.
    auto genotypes = random_genotypes(config.batch_size, task.genotype_size(), config.init_scale, rng.child(kInitStream));
    auto initial = evaluate(genotypes);
    std::optional<double> loss;
    {
        auto features = encode_all(model, initial);
        if (initial.size() >= (config.use_triplet ? 3u : 1u))
            loss = train_encoder(model, config, initial, features, counters, rng.child(kFirstIterationStream).child(1u << 20));
        features = encode_all(model, initial);
        for (std::size_t i = 0; i < initial.size(); ++i)
            initial[i].feature = std::move(features[i]);
        repertoire.add(std::move(initial));
    }
    loop.record(0, repertoire.size(), loss);

    std::size_t iteration = 0;
    while (loop.budget_left() && !loop.should_stop()) {
        ++iteration;
        const RngStream it_rng = rng.child(kFirstIterationStream + iteration);
        std::vector<const Genotype*> parents;
        parents.reserve(repertoire.size());
        for (const auto& s : repertoire.solutions())
            parents.push_back(&s.genotype);
        auto children = make_offspring(parents, config, it_rng);
        auto batch = evaluate(children);
        auto features = encode_all(model, batch);
        for (std::size_t i = 0; i < batch.size(); ++i)
            batch[i].feature = std::move(features[i]);
        repertoire.add(std::move(batch));

        loss.reset();
        if (schedule.is_update(iteration) && repertoire.size() >= (config.use_triplet ? 3u : 1u)) {
            std::vector<Vector> current;
            current.reserve(repertoire.size());
            for (const auto& s : repertoire.solutions())
                current.push_back(s.feature);
            try {
                loss = train_encoder(model, config, repertoire.solutions(), current, counters, it_rng.child(1u << 20));
            }
            catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " [run '" + config.name + "', seed "
                                   + std::to_string(config.seed) + ", iteration " + std::to_string(iteration) + "]");
            }
            repertoire.reencode([&](const StateTrajectory& t) { return model.encode(t); });
            ++counters.reencodings;
        }
        if (config.use_extinction && iteration % config.extinction_period == 0) {
            RngStream ext_rng = it_rng.child((1u << 20) + 1);
            repertoire.extinction(config.extinction_proportion, ext_rng);
            ++counters.extinctions;
        }
        loop.record(iteration, repertoire.size(), loss);
    }

    RunResult& out = loop.result();
    counters.evaluations = out.counters.evaluations;
    counters.iterations = iteration;
    out.counters = counters;
    out.solutions = repertoire.solutions();
    out.archive_kind = "unstructured";
    out.encoder = std::move(model);
    return std::move(out);
}

RunResult run_algorithm(const AlgorithmConfig& config, const Task& task)
{
    switch (config.algorithm) {
    case AlgorithmKind::ga:
        return run_ga(config, task);
    case AlgorithmKind::map_elites:
        return run_map_elites(config, task);
    case AlgorithmKind::aurora:
        return run_aurora(config, task);
    }
    throw Error("unknown algorithm");
}

RunResult run_algorithm(const AlgorithmConfig& config)
{
    config.validate();
    const auto task = make_task(config);
    return run_algorithm(config, *task);
}

std::string metrics_csv(const std::vector<MetricRow>& rows)
{
    std::string out = "iteration,evaluations,max_fitness,repertoire_size,encoder_loss\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},", r.iteration, r.evaluations, r.max_fitness, r.repertoire_size);
        if (r.encoder_loss)
            out += fmt::format("{}", *r.encoder_loss);
        out += '\n';
    }
    return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("iteration,evaluations,max_fitness", 0) != 0)
        throw Error("metrics.csv: missing header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (line.back() == ',')
            cells.emplace_back();
        if (cells.size() != 5)
            throw Error("metrics.csv: malformed row '" + line + "'");
        try {
            MetricRow r;
            r.iteration = std::stoull(cells[0]);
            r.evaluations = std::stoull(cells[1]);
            r.max_fitness = std::stod(cells[2]);
            r.repertoire_size = std::stoull(cells[3]);
            if (!cells[4].empty())
                r.encoder_loss = std::stod(cells[4]);
            rows.push_back(r);
        }
        catch (const std::logic_error&) {
            throw Error("metrics.csv: malformed row '" + line + "'");
        }
    }
    return rows;
}

void write_run_directory(const std::string& dir, const RunResult& result, double wall_seconds)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);

    auto write_text = [](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out)
            throw Error("cannot write " + p.string());
        out << text;
    };

    write_text(root / "config.json", result.config.to_json().dump(2) + "\n");
    write_text(root / "metrics.csv", metrics_csv(result.metrics));

    std::vector<const Solution*> sols;
    sols.reserve(result.solutions.size());
    for (const auto& s : result.solutions)
        sols.push_back(&s);
    const std::size_t encoder_version = result.counters.mse_trainings + result.counters.triplet_trainings;
    write_snapshot((root / "repertoire.snapshot").string(),
                   {result.counters.iterations, result.counters.evaluations, encoder_version, result.archive_kind}, sols);
    if (result.encoder)
        result.encoder->save((root / "encoder.ckpt").string());

    nlohmann::json meta{
        {"variant", result.config.name},
        {"seed", result.config.seed},
        {"wall_time_seconds", wall_seconds},
        {"evaluations", result.counters.evaluations},
        {"iterations", result.counters.iterations},
        {"max_fitness", result.tracker.has_best() ? result.tracker.max_fitness() : 0.0},
        {"complete", true},
    };
    if (result.random_feature) {
        const auto& f = *result.random_feature;
        meta["random_feature_spec"] = {{"rows", f.rows}, {"dims", f.dims}, {"lo", f.lo}, {"hi", f.hi}};
    }
    // meta.json last: its presence marks a finished run directory.
    write_text(root / "meta.json", meta.dump(2) + "\n");
}

} // namespace uqd
