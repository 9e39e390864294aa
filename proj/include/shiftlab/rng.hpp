#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace shiftlab {

using Engine = std::mt19937_64;

// Derives an independent stream seed from a key such as (master, repetition)
// or (master, i, j). Parallel work units draw their own stream this way so
// results do not depend on scheduling.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2 + 1);
  words.push_back(0x5eed1abu);
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline Engine make_engine(std::initializer_list<std::uint64_t> key) {
  return Engine(derive_seed(key));
}

}  // namespace shiftlab
