#include "lso/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "lso/errors.hpp"

namespace lso {

std::vector<std::size_t> rank(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<std::size_t> out;
  out.reserve(scores.size());
  for (double s : scores) {
    if (!std::isfinite(s)) throw GuardError("rank: scores must be finite");
    // Position of the first element not greater than s == count of greater.
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), s, std::greater<>());
    out.push_back(static_cast<std::size_t>(it - sorted.begin()));
  }
  return out;
}

std::vector<double> rank_weights(std::span<const double> scores, double k) {
  if (scores.empty()) throw GuardError("rank_weights: need at least one score");
  if (!std::isfinite(k)) throw GuardError("rank_weights: k must be finite");
  const auto ranks = rank(scores);
  const double offset = std::pow(10.0, -k) * static_cast<double>(scores.size());
  if (!(offset > 0.0) || !std::isfinite(offset)) throw GuardError("rank_weights: k out of range");
  std::vector<double> w(ranks.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    w[i] = 1.0 / (offset + static_cast<double>(ranks[i]));
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace lso
