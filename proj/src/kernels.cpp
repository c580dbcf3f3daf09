// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uqd::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_scores_input(std::span<const Vector> features, std::span<const double> fitness)
{
    if (features.size() != fitness.size())
        throw Error("dominated_novelty_scores: feature/fitness count mismatch");
    for (const auto& f : features)
        if (f.size() != features.front().size())
            throw Error("dominated_novelty_scores: feature dimension mismatch");
}

double score_of(std::size_t i, std::span<const Vector> features, std::span<const double> fitness)
{
    double best = kInf;
    for (std::size_t j = 0; j < features.size(); ++j)
        if (fitness[j] > fitness[i])
            best = std::min(best, (features[i] - features[j]).squaredNorm());
    return std::sqrt(best);
}

std::size_t nearest_of(const Matrix& centroids, const Matrix& points, Eigen::Index i)
{
    const auto dims = static_cast<std::size_t>(centroids.cols());
    const double* p = points.data() + i * points.cols();
    const double* c = centroids.data();
    std::size_t best = 0;
    double best_d = kInf;
    for (Eigen::Index k = 0; k < centroids.rows(); ++k, c += dims) {
        double d = 0.0;
        for (std::size_t j = 0; j < dims; ++j) {
            const double diff = c[j] - p[j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::size_t>(k);
        }
    }
    return best;
}

double row_min_distance(std::span<const Vector> features, std::size_t i)
{
    double best = kInf;
    for (std::size_t j = i + 1; j < features.size(); ++j)
        best = std::min(best, (features[i] - features[j]).squaredNorm());
    return best;
}

void check_centroids(const Matrix& centroids, const Matrix& points)
{
    if (centroids.rows() == 0)
        throw Error("nearest_centroids: no centroids");
    if (centroids.cols() != points.cols())
        throw Error("nearest_centroids: dimension mismatch");
}

// Keeps the exception of the lowest failing index so failures are reproducible.
class FirstError {
public:
    void capture(std::size_t index)
    {
#pragma omp critical(uqd_kernel_error)
        {
            if (!error_ || index < index_) {
                error_ = std::current_exception();
                index_ = index;
            }
        }
    }
    void rethrow() const
    {
        if (error_)
            std::rethrow_exception(error_);
    }

private:
    std::exception_ptr error_;
    std::size_t index_ = 0;
};

} // namespace

namespace serial {

std::vector<EpisodeResult> evaluate_batch(const Task& task, std::span<const Genotype> genotypes)
{
    std::vector<EpisodeResult> out(genotypes.size());
    for (std::size_t i = 0; i < genotypes.size(); ++i)
        out[i] = task.evaluate(genotypes[i]);
    return out;
}

std::vector<double> dominated_novelty_scores(std::span<const Vector> features, std::span<const double> fitness)
{
    check_scores_input(features, fitness);
    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        out[i] = score_of(i, features, fitness);
    return out;
}

std::vector<std::size_t> nearest_centroids(const Matrix& centroids, const Matrix& points)
{
    check_centroids(centroids, points);
    std::vector<std::size_t> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out[static_cast<std::size_t>(i)] = nearest_of(centroids, points, i);
    return out;
}

double min_pairwise_distance(std::span<const Vector> features)
{
    if (features.size() < 2)
        throw Error("min_pairwise_distance: need at least two points");
    double best = kInf;
    for (std::size_t i = 0; i < features.size(); ++i)
        best = std::min(best, row_min_distance(features, i));
    return std::sqrt(best);
}

std::vector<Vector> map_trajectories(std::span<const StateTrajectory* const> trajectories, const TrajectoryMap& fn)
{
    std::vector<Vector> out(trajectories.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i)
        out[i] = fn(*trajectories[i]);
    return out;
}

} // namespace serial

namespace parallel {

std::vector<EpisodeResult> evaluate_batch(const Task& task, std::span<const Genotype> genotypes)
{
    std::vector<EpisodeResult> out(genotypes.size());
    FirstError err;
    const auto n = static_cast<std::ptrdiff_t>(genotypes.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = task.evaluate(genotypes[static_cast<std::size_t>(i)]);
        }
        catch (...) {
            err.capture(static_cast<std::size_t>(i));
        }
    }
    err.rethrow();
    return out;
}

std::vector<double> dominated_novelty_scores(std::span<const Vector> features, std::span<const double> fitness)
{
    check_scores_input(features, fitness);
    std::vector<double> out(features.size());
    const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = score_of(static_cast<std::size_t>(i), features, fitness);
    return out;
}

std::vector<std::size_t> nearest_centroids(const Matrix& centroids, const Matrix& points)
{
    check_centroids(centroids, points);
    std::vector<std::size_t> out(static_cast<std::size_t>(points.rows()));
    const Eigen::Index n = points.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = nearest_of(centroids, points, i);
    return out;
}

double min_pairwise_distance(std::span<const Vector> features)
{
    if (features.size() < 2)
        throw Error("min_pairwise_distance: need at least two points");
    double best = kInf;
    const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(dynamic, 8) reduction(min : best)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        best = std::min(best, row_min_distance(features, static_cast<std::size_t>(i)));
    return std::sqrt(best);
}

std::vector<Vector> map_trajectories(std::span<const StateTrajectory* const> trajectories, const TrajectoryMap& fn)
{
    std::vector<Vector> out(trajectories.size());
    FirstError err;
    const auto n = static_cast<std::ptrdiff_t>(trajectories.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(*trajectories[static_cast<std::size_t>(i)]);
        }
        catch (...) {
            err.capture(static_cast<std::size_t>(i));
        }
    }
    err.rethrow();
    return out;
}

} // namespace parallel

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace uqd::kernels
