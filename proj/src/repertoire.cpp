// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/repertoire.hpp>
#include <uqd/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace uqd {

Bounds Bounds::unit(std::size_t dims)
{
    return {Vector::Zero(static_cast<Eigen::Index>(dims)), Vector::Ones(static_cast<Eigen::Index>(dims))};
}

Matrix cvt_centroids(std::size_t count, std::size_t dims, const Bounds& bounds, RngStream& rng,
                     std::size_t samples_per_centroid, std::size_t max_iterations)
{
    if (count == 0 || dims == 0)
        throw Error("cvt_centroids: need at least one centroid and one dimension");
    if (bounds.dims() != dims || !bounds.lo.allFinite() || !bounds.hi.allFinite() || (bounds.hi.array() < bounds.lo.array()).any())
        throw Error("cvt_centroids: bounds must be finite with lo <= hi in every dimension");

    const auto n = static_cast<Eigen::Index>(std::max(std::max<std::size_t>(samples_per_centroid, 1) * count, kMinCvtSamples));
    const auto d = static_cast<Eigen::Index>(dims);
    Matrix samples(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            samples(i, j) = rng.uniform(bounds.lo[j], bounds.hi[j]);

    Matrix centroids = samples.topRows(static_cast<Eigen::Index>(count));
    std::vector<std::size_t> assignment;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        auto next = kernels::parallel::nearest_centroids(centroids, samples);
        if (next == assignment)
            break;
        assignment = std::move(next);
        Matrix sums = Matrix::Zero(centroids.rows(), d);
        std::vector<std::size_t> counts(count, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = assignment[static_cast<std::size_t>(i)];
            sums.row(static_cast<Eigen::Index>(c)) += samples.row(i);
            ++counts[c];
        }
        // Empty cells keep their previous position.
        for (std::size_t c = 0; c < count; ++c)
            if (counts[c] > 0)
                centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
    return centroids;
}

GridRepertoire::GridRepertoire(Matrix centroids, Bounds bounds)
    : centroids_(std::move(centroids)), bounds_(std::move(bounds)), cells_(static_cast<std::size_t>(centroids_.rows()))
{
    if (centroids_.rows() == 0)
        throw Error("grid: no centroids");
    if (bounds_.dims() != static_cast<std::size_t>(centroids_.cols()))
        throw Error("grid: bounds/centroid dimension mismatch");
}

Vector GridRepertoire::clip(const Vector& feature) const
{
    if (feature.size() != centroids_.cols())
        throw Error("grid: feature has dimension " + std::to_string(feature.size()) + ", expected "
                    + std::to_string(centroids_.cols()));
    return feature.cwiseMax(bounds_.lo).cwiseMin(bounds_.hi);
}

std::size_t GridRepertoire::cell_of(const Vector& feature) const
{
    Matrix point = clip(feature).transpose();
    return kernels::serial::nearest_centroids(centroids_, point).front();
}

AddOutcome GridRepertoire::add(Solution candidate)
{
    if (!std::isfinite(candidate.fitness))
        throw NumericError("grid: non-finite fitness");
    candidate.feature = clip(candidate.feature);
    auto& slot = cells_[cell_of(candidate.feature)];
    if (!slot) {
        slot = std::move(candidate);
        ++occupied_;
        return AddOutcome::inserted;
    }
    if (candidate.fitness > slot->fitness) {
        slot = std::move(candidate);
        return AddOutcome::replaced;
    }
    return AddOutcome::rejected;
}

std::vector<const Solution*> GridRepertoire::solutions() const
{
    std::vector<const Solution*> out;
    out.reserve(occupied_);
    for (const auto& c : cells_)
        if (c)
            out.push_back(&*c);
    return out;
}

const Solution* GridRepertoire::best() const
{
    const Solution* best = nullptr;
    for (const auto& c : cells_)
        if (c && (best == nullptr || c->fitness > best->fitness))
            best = &*c;
    return best;
}

std::vector<std::size_t> dominated_novelty_keep(std::span<const Vector> features, std::span<const double> fitness,
                                                std::size_t capacity)
{
    const std::size_t n = features.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (n <= capacity)
        return order;

    const auto score = kernels::parallel::dominated_novelty_scores(features, fitness);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b])
            return score[a] > score[b];
        return fitness[a] > fitness[b];
    });
    order.resize(capacity);
    std::sort(order.begin(), order.end());
    return order;
}

UnstructuredRepertoire::UnstructuredRepertoire(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0)
        throw Error("unstructured repertoire: capacity must be positive");
}

std::size_t UnstructuredRepertoire::feature_dim() const
{
    return members_.empty() ? 0 : static_cast<std::size_t>(members_.front().feature.size());
}

const Solution& UnstructuredRepertoire::best() const
{
    if (members_.empty())
        throw Error("unstructured repertoire: empty");
    return *std::max_element(members_.begin(), members_.end(),
                             [](const Solution& a, const Solution& b) { return a.fitness < b.fitness; });
}

void UnstructuredRepertoire::filter(std::vector<Solution> pool)
{
    std::vector<Vector> features;
    std::vector<double> fitness;
    features.reserve(pool.size());
    fitness.reserve(pool.size());
    for (const auto& s : pool) {
        if (!std::isfinite(s.fitness))
            throw NumericError("unstructured repertoire: non-finite fitness");
        if (s.feature.size() != pool.front().feature.size())
            throw Error("unstructured repertoire: feature dimension mismatch");
        features.push_back(s.feature);
        fitness.push_back(s.fitness);
    }
    const auto keep = dominated_novelty_keep(features, fitness, capacity_);
    members_.clear();
    members_.reserve(keep.size());
    for (auto i : keep)
        members_.push_back(std::move(pool[i]));
}

void UnstructuredRepertoire::add(std::vector<Solution> candidates)
{
    if (!members_.empty())
        for (const auto& c : candidates)
            if (static_cast<std::size_t>(c.feature.size()) != feature_dim())
                throw Error("unstructured repertoire: candidate feature dimension mismatch");
    std::vector<Solution> pool = std::move(members_);
    pool.reserve(pool.size() + candidates.size());
    for (auto& c : candidates)
        pool.push_back(std::move(c));
    filter(std::move(pool));
}

std::size_t extinction_survivors(std::size_t size, double proportion)
{
    if (!(proportion > 0.0 && proportion <= 1.0))
        throw Error("extinction: proportion must be in (0, 1]");
    const auto rounded = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(size) + 0.5));
    return std::min(size, std::max<std::size_t>(1, rounded));
}

void UnstructuredRepertoire::extinction(double proportion, RngStream& rng)
{
    if (members_.empty())
        throw Error("extinction: empty repertoire");
    const std::size_t keep = extinction_survivors(members_.size(), proportion);

    std::size_t best = 0;
    for (std::size_t i = 1; i < members_.size(); ++i)
        if (members_[i].fitness > members_[best].fitness)
            best = i;

    std::vector<std::size_t> rest;
    rest.reserve(members_.size() - 1);
    for (std::size_t i = 0; i < members_.size(); ++i)
        if (i != best)
            rest.push_back(i);
    // Partial Fisher-Yates: the first keep-1 slots are a uniform sample without replacement.
    for (std::size_t i = 0; i + 1 < keep; ++i) {
        const std::size_t j = i + rng.index(rest.size() - i);
        std::swap(rest[i], rest[j]);
    }
    std::vector<std::size_t> survivors(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(keep - 1));
    survivors.push_back(best);
    std::sort(survivors.begin(), survivors.end());

    std::vector<Solution> next;
    next.reserve(keep);
    for (auto i : survivors)
        next.push_back(std::move(members_[i]));
    members_ = std::move(next);
}

void UnstructuredRepertoire::reencode(const std::function<Vector(const StateTrajectory&)>& encode)
{
    std::vector<const StateTrajectory*> trajectories;
    trajectories.reserve(members_.size());
    for (const auto& s : members_)
        trajectories.push_back(&s.trajectory);
    auto features = kernels::parallel::map_trajectories(trajectories, encode);
    for (std::size_t i = 0; i < members_.size(); ++i)
        members_[i].feature = std::move(features[i]);
    filter(std::move(members_));
}

void BestTracker::observe(const Solution& s)
{
    if (!best_ || s.fitness > best_->fitness)
        best_ = s;
}

void BestTracker::record(std::size_t evaluations)
{
    if (!best_)
        throw Error("tracker: nothing observed yet");
    history_.push_back({evaluations, best_->fitness});
}

const Solution& BestTracker::best() const
{
    if (!best_)
        throw Error("tracker: nothing observed yet");
    return *best_;
}

double BestTracker::max_fitness() const
{
    return best().fitness;
}

nlohmann::json solution_to_json(const Solution& s)
{
    nlohmann::json traj = nlohmann::json::array();
    for (Eigen::Index r = 0; r < s.trajectory.states.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < s.trajectory.states.cols(); ++c)
            row.push_back(s.trajectory.states(r, c));
        traj.push_back(std::move(row));
    }
    return {
        {"genotype", std::vector<double>(s.genotype.params.data(), s.genotype.params.data() + s.genotype.params.size())},
        {"fitness", s.fitness},
        {"feature", std::vector<double>(s.feature.data(), s.feature.data() + s.feature.size())},
        {"trajectory", std::move(traj)},
    };
}

Solution solution_from_json(const nlohmann::json& j)
{
    Solution s;
    const auto g = j.at("genotype").get<std::vector<double>>();
    s.genotype.params = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
    s.fitness = j.at("fitness").get<double>();
    const auto f = j.at("feature").get<std::vector<double>>();
    s.feature = Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size()));
    const auto& traj = j.at("trajectory");
    const auto rows = static_cast<Eigen::Index>(traj.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(traj[0].size()) : 0;
    s.trajectory.states.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(traj[static_cast<std::size_t>(r)].size()) != cols)
            throw Error("snapshot: ragged trajectory");
        for (Eigen::Index c = 0; c < cols; ++c)
            s.trajectory.states(r, c) = traj[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
    return s;
}

void write_snapshot(const std::string& path, const SnapshotMeta& meta, std::span<const Solution* const> solutions)
{
    nlohmann::json sols = nlohmann::json::array();
    for (const auto* s : solutions)
        sols.push_back(solution_to_json(*s));
    const nlohmann::json doc{
        {"format", "uqd-snapshot-1"},
        {"meta",
         {{"iteration", meta.iteration},
          {"evaluations", meta.evaluations},
          {"encoder_version", meta.encoder_version},
          {"kind", meta.kind}}},
        {"solutions", std::move(sols)},
    };
    std::ofstream out(path);
    if (!out)
        throw Error("snapshot: cannot write " + path);
    out << doc.dump() << '\n';
}

std::pair<SnapshotMeta, std::vector<Solution>> read_snapshot(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("snapshot: cannot open " + path);
    try {
        nlohmann::json doc;
        in >> doc;
        if (doc.at("format") != "uqd-snapshot-1")
            throw Error("snapshot: unsupported format in " + path);
        SnapshotMeta meta;
        const auto& m = doc.at("meta");
        meta.iteration = m.at("iteration").get<std::size_t>();
        meta.evaluations = m.at("evaluations").get<std::size_t>();
        meta.encoder_version = m.at("encoder_version").get<std::size_t>();
        meta.kind = m.at("kind").get<std::string>();
        std::vector<Solution> sols;
        for (const auto& s : doc.at("solutions"))
            sols.push_back(solution_from_json(s));
        return {meta, std::move(sols)};
    }
    catch (const nlohmann::json::exception& e) {
        throw Error("snapshot: " + path + ": " + e.what());
    }
}

} // namespace uqd
