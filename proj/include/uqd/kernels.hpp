// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_KERNELS_HPP
#define UQD_KERNELS_HPP

// Data-parallel inner loops of the search. Every kernel exists twice: a
// plain serial reference and an OpenMP version. Both compute each output
// element with the same arithmetic, so results are bit-identical and the
// tests compare them with exact equality.

#include <uqd/core.hpp>
#include <uqd/env.hpp>

#include <functional>
#include <span>
#include <vector>

namespace uqd::kernels {

using TrajectoryMap = std::function<Vector(const StateTrajectory&)>;

namespace serial {

std::vector<EpisodeResult> evaluate_batch(const Task& task, std::span<const Genotype> genotypes);

// Distance to the nearest strictly fitter member; +inf when none is fitter.
std::vector<double> dominated_novelty_scores(std::span<const Vector> features, std::span<const double> fitness);

// Index of the nearest centroid (row of `centroids`) for every row of `points`; ties go to the lowest index.
std::vector<std::size_t> nearest_centroids(const Matrix& centroids, const Matrix& points);

double min_pairwise_distance(std::span<const Vector> features);

std::vector<Vector> map_trajectories(std::span<const StateTrajectory* const> trajectories, const TrajectoryMap& fn);

} // namespace serial

namespace parallel {

std::vector<EpisodeResult> evaluate_batch(const Task& task, std::span<const Genotype> genotypes);
std::vector<double> dominated_novelty_scores(std::span<const Vector> features, std::span<const double> fitness);
std::vector<std::size_t> nearest_centroids(const Matrix& centroids, const Matrix& points);
double min_pairwise_distance(std::span<const Vector> features);
std::vector<Vector> map_trajectories(std::span<const StateTrajectory* const> trajectories, const TrajectoryMap& fn);

} // namespace parallel

int max_threads();

} // namespace uqd::kernels

#endif
