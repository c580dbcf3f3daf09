// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_CORE_HPP
#define UQD_CORE_HPP

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace uqd {

using Vector = Eigen::VectorXd;
// Row-major so that a trajectory flattens time-major (row 0 first).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a computation produces NaN/inf (diverging training, corrupt genotype).
class NumericError : public Error {
public:
    using Error::Error;
};

struct Genotype {
    Vector params;

    std::size_t size() const { return static_cast<std::size_t>(params.size()); }
};

struct StateTrajectory {
    Matrix states; // steps x dims

    std::size_t steps() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(states.cols()); }
};

struct Solution {
    Genotype genotype;
    double fitness = 0.0;
    Vector feature;
    StateTrajectory trajectory;
};

/// Deterministic random stream identified by (seed, stream id).
///
/// Streams never share state: `child(id)` derives a new stream from the
/// identity of this one without consuming any of its draws, so a batch of
/// workers can each own a child and still reproduce the serial sequence.
class RngStream {
public:
    using engine_type = std::mt19937_64;

    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    RngStream child(std::uint64_t id) const;

    double uniform(); // [0, 1)
    double uniform(double lo, double hi);
    double normal(); // standard normal
    std::size_t index(std::size_t n); // uniform in [0, n)

    engine_type& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    engine_type engine_;
};

std::uint64_t mix64(std::uint64_t x);

double euclidean_distance(const Vector& a, const Vector& b);
double squared_distance(const Vector& a, const Vector& b);

// Row indices round(i * (total - 1) / (rows - 1)); endpoints included.
std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t rows);
StateTrajectory subsample_trajectory(const Matrix& full, std::size_t rows);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

} // namespace uqd

#endif
