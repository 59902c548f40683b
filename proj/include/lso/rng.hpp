#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lso {

using Rng = std::mt19937_64;

/// Independent, named random stream derived from a master seed. Streams with
/// different (name, index) pairs never share state, so stages of a run can be
/// reseeded without perturbing each other.
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

}  // namespace lso
