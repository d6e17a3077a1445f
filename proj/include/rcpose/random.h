#pragma once

#include <cstdint>
#include <random>

namespace rcpose {

using Rng = std::mt19937_64;

// Stream splitting rule: the generator for (seed, stream) is seeded from the
// four 32-bit halves of both values, so worker/trial k of a run uses
// make_rng(seed, k) and never shares state with another worker.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace rcpose
