// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

#ifndef UQD_VARIATION_HPP
#define UQD_VARIATION_HPP

#include <uqd/core.hpp>

#include <cstddef>
#include <vector>

namespace uqd {

struct VariationParams {
    double iso_sigma = 0.2;  // isotropic Gaussian scale
    double line_sigma = 0.0; // scale of the step along x2 - x1
    std::size_t batch_size = 64;
};

struct ParentPair {
    std::size_t first = 0;
    std::size_t second = 0;
};

// b pairs of indices into a population of `population_size`, drawn
// independently and with replacement.
std::vector<ParentPair> select_uniform(std::size_t population_size, std::size_t b, RngStream& rng);

// Iso+line operator: x1 + iso_sigma * eps + line_sigma * zeta * (x2 - x1).
Genotype iso_line_dd(const Genotype& x1, const Genotype& x2, const VariationParams& params, RngStream& rng);

} // namespace uqd

#endif
