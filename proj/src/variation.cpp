// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#include <uqd/variation.hpp>

namespace uqd {

std::vector<ParentPair> select_uniform(std::size_t population_size, std::size_t b, RngStream& rng)
{
    if (population_size == 0)
        throw Error("select_uniform: empty population");
    std::vector<ParentPair> pairs(b);
    for (auto& p : pairs) {
        p.first = rng.index(population_size);
        p.second = rng.index(population_size);
    }
    return pairs;
}

Genotype iso_line_dd(const Genotype& x1, const Genotype& x2, const VariationParams& params, RngStream& rng)
{
    if (x1.size() != x2.size())
        throw Error("iso_line_dd: parents differ in dimension");
    Genotype child{x1.params};
    for (Eigen::Index i = 0; i < child.params.size(); ++i)
        child.params[i] += params.iso_sigma * rng.normal();
    const double zeta = rng.normal();
    if (params.line_sigma != 0.0)
        child.params += (params.line_sigma * zeta) * (x2.params - x1.params);
    if (!child.params.allFinite())
        throw NumericError("iso_line_dd: non-finite offspring");
    return child;
}

} // namespace uqd
