#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "nested_eig/types.hpp"

namespace nested_eig {

// Maps (master seed, purpose tag, index) to an engine seed. Every outer
// sample draws from its own substream, so results do not depend on how the
// outer loop is scheduled across threads.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index);

// 64-bit Mersenne Twister with portable uniform/normal transforms.
// std::normal_distribution is implementation-defined, so it is not used.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master, std::string_view purpose, std::uint64_t index)
      : engine_(derive_seed(master, purpose, index)) {}

  // Uniform on [0, 1).
  double uniform();
  double normal();
  Vec normal_vector(Index n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace nested_eig
