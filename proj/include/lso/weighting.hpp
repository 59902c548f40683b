#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lso {

/// Zero-based competition rank: the number of scores strictly greater than
/// each entry. Ties share a rank; the best entries have rank 0.
std::vector<std::size_t> rank(std::span<const double> scores);

/// Rank-based weights w_i proportional to 1 / (10^-k * N + rank_i),
/// normalized to sum to one.
std::vector<double> rank_weights(std::span<const double> scores, double k);

}  // namespace lso
