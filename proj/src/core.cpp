// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/core.hpp>

#include <cmath>

namespace uqd {

std::uint64_t mix64(std::uint64_t x)
{
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)))
{
}

RngStream RngStream::child(std::uint64_t id) const
{
    return RngStream(seed_, mix64(stream_ * 0x9e3779b97f4a7c15ULL + id + 1));
}

double RngStream::uniform()
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double RngStream::uniform(double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double RngStream::normal()
{
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
}

std::size_t RngStream::index(std::size_t n)
{
    if (n == 0)
        throw Error("RngStream::index: empty range");
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double squared_distance(const Vector& a, const Vector& b)
{
    if (a.size() != b.size())
        throw Error("distance: dimension mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    return (a - b).squaredNorm();
}

double euclidean_distance(const Vector& a, const Vector& b)
{
    return std::sqrt(squared_distance(a, b));
}

std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t rows)
{
    if (rows == 0)
        throw Error("subsample: need at least one row");
    if (rows > total)
        throw Error("subsample: requested " + std::to_string(rows) + " rows from " + std::to_string(total));
    std::vector<std::size_t> idx(rows);
    if (rows == 1) {
        idx[0] = 0;
        return idx;
    }
    const double step = static_cast<double>(total - 1) / static_cast<double>(rows - 1);
    for (std::size_t i = 0; i < rows; ++i)
        idx[i] = static_cast<std::size_t>(std::floor(static_cast<double>(i) * step + 0.5));
    idx.back() = total - 1;
    return idx;
}

StateTrajectory subsample_trajectory(const Matrix& full, std::size_t rows)
{
    const auto idx = subsample_indices(static_cast<std::size_t>(full.rows()), rows);
    StateTrajectory out;
    out.states.resize(static_cast<Eigen::Index>(rows), full.cols());
    for (std::size_t i = 0; i < rows; ++i)
        out.states.row(static_cast<Eigen::Index>(i)) = full.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

bool all_finite(const Vector& v)
{
    return v.allFinite();
}

bool all_finite(const Matrix& m)
{
    return m.allFinite();
}

} // namespace uqd
