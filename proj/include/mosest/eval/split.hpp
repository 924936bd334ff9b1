#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "mosest/core/error.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::eval {

enum class Split { kTrain, kVal, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline constexpr std::uint64_t kSplitStream = 0x5B11;

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::map<std::string, Split> of;
  /// ids per split, in input order
  std::vector<std::string> train, val, test;

  Split at(const std::string& id) const {
    const auto it = of.find(id);
    if (it == of.end()) throw DataError("utterance '" + id + "' is not in the split");
    return it->second;
  }
};

/// val = test = round(0.15 n), train takes the remainder; membership comes
/// from a seeded shuffle.
inline SplitAssignment split(const std::vector<std::string>& ids, std::uint64_t seed) {
  const std::size_t n = ids.size();
  if (n < 3) throw InvalidArgument("split: need at least 3 utterances, got " + std::to_string(n));
  const auto held = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kSplitStream));
  shuffle(std::span(idx), rng);
  std::vector<Split> part(n, Split::kTrain);
  for (std::size_t i = 0; i < held; ++i) part[idx[i]] = Split::kTest;
  for (std::size_t i = held; i < 2 * held; ++i) part[idx[i]] = Split::kVal;
  SplitAssignment a;
  a.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    if (!a.of.emplace(ids[i], part[i]).second) throw DataError("split: duplicate utterance id '" + ids[i] + "'");
    (part[i] == Split::kTrain ? a.train : part[i] == Split::kVal ? a.val : a.test).push_back(ids[i]);
  }
  return a;
}

}  // namespace mosest::eval
