// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_REPERTOIRE_HPP
#define UQD_REPERTOIRE_HPP

#include <uqd/core.hpp>

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uqd {

struct Bounds {
    Vector lo;
    Vector hi;

    static Bounds unit(std::size_t dims);
    std::size_t dims() const { return static_cast<std::size_t>(lo.size()); }
};

/// Lloyd k-means over `samples_per_centroid * count` uniform samples of the box,
/// never fewer than kMinCvtSamples so small grids still settle near the true CVT.
inline constexpr std::size_t kMinCvtSamples = 10000;
Matrix cvt_centroids(std::size_t count, std::size_t dims, const Bounds& bounds, RngStream& rng,
                     std::size_t samples_per_centroid = 50, std::size_t max_iterations = 25);

enum class AddOutcome { inserted, replaced, rejected };

/// MAP-Elites archive: one elite per CVT cell.
class GridRepertoire {
public:
    GridRepertoire(Matrix centroids, Bounds bounds);

    AddOutcome add(Solution candidate);

    std::size_t cell_of(const Vector& feature) const;
    std::size_t num_cells() const { return cells_.size(); }
    std::size_t size() const { return occupied_; }
    bool empty() const { return occupied_ == 0; }

    const Matrix& centroids() const { return centroids_; }
    const Bounds& bounds() const { return bounds_; }
    const std::optional<Solution>& cell(std::size_t i) const { return cells_.at(i); }

    // Occupied cells in index order.
    std::vector<const Solution*> solutions() const;
    const Solution* best() const;

private:
    Vector clip(const Vector& feature) const;

    Matrix centroids_;
    Bounds bounds_;
    std::vector<std::optional<Solution>> cells_;
    std::size_t occupied_ = 0;
};

/// Indices kept by dominated-novelty competition, in ascending (insertion) order.
///
/// Each member is scored by its distance to the nearest strictly fitter member
/// (+inf for the fittest). The `capacity` highest scores survive; ties go to
/// higher fitness, then to the earlier index.
std::vector<std::size_t> dominated_novelty_keep(std::span<const Vector> features, std::span<const double> fitness,
                                                std::size_t capacity);

/// Unbounded-feature archive for learned features, bounded in size.
class UnstructuredRepertoire {
public:
    explicit UnstructuredRepertoire(std::size_t capacity);

    // Merges the batch into the archive and keeps the winners of the local competition.
    void add(std::vector<Solution> candidates);

    // Keeps max(1, round(k * size)) members: the best plus a uniform sample of the rest.
    void extinction(double proportion, RngStream& rng);

    // Recomputes every feature from the stored trajectory, then re-filters to capacity.
    void reencode(const std::function<Vector(const StateTrajectory&)>& encode);

    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<Solution>& solutions() const { return members_; }
    const Solution& best() const;
    std::size_t feature_dim() const;

private:
    void filter(std::vector<Solution> pool);

    std::size_t capacity_;
    std::vector<Solution> members_;
};

std::size_t extinction_survivors(std::size_t size, double proportion);

struct TrackerSample {
    std::size_t evaluations = 0;
    double max_fitness = 0.0;
};

/// Passive record of the best solution seen so far.
class BestTracker {
public:
    void observe(const Solution& s);
    void record(std::size_t evaluations);

    bool has_best() const { return best_.has_value(); }
    const Solution& best() const;
    double max_fitness() const;
    const std::vector<TrackerSample>& history() const { return history_; }

private:
    std::optional<Solution> best_;
    std::vector<TrackerSample> history_;
};

struct SnapshotMeta {
    std::size_t iteration = 0;
    std::size_t evaluations = 0;
    std::size_t encoder_version = 0;
    std::string kind; // "unstructured", "grid" or "population"
};

nlohmann::json solution_to_json(const Solution& s);
Solution solution_from_json(const nlohmann::json& j);

void write_snapshot(const std::string& path, const SnapshotMeta& meta, std::span<const Solution* const> solutions);
std::pair<SnapshotMeta, std::vector<Solution>> read_snapshot(const std::string& path);

} // namespace uqd

#endif
