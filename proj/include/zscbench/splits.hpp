#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "zscbench/errors.hpp"
#include "zscbench/rng.hpp"

namespace zsc {

// Disjoint split of the class universe into seen (training) and unseen (test)
// classes. Train and test never overlap.
struct ClassPartition {
  std::set<int> train_classes;
  std::set<int> test_classes;
};

// Uniform random test_count-subset of [0, num_classes) as the test side; the
// complement trains. Deterministic in the seed.
inline ClassPartition sample_partition(int num_classes, int test_count, SeedSpec seed) {
  if (test_count < 2 || test_count > num_classes - 2)
    throw ConfigError("test_count must be in [2, num_classes - 2], got " +
                      std::to_string(test_count) + " for " + std::to_string(num_classes) +
                      " classes");
  std::vector<int> ids(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < num_classes; ++i) ids[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  // partial Fisher-Yates: the first test_count slots become the test classes
  for (int i = 0; i < test_count; ++i) {
    const auto j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(num_classes - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ClassPartition p;
  for (int i = 0; i < test_count; ++i) p.test_classes.insert(ids[static_cast<std::size_t>(i)]);
  for (int i = test_count; i < num_classes; ++i)
    p.train_classes.insert(ids[static_cast<std::size_t>(i)]);
  return p;
}

// k independent draws; partition i uses stream (base_seed, i). Duplicates
// across draws are permitted.
inline std::vector<ClassPartition> sample_partitions(int num_classes, int test_count, int k,
                                                     std::uint64_t base_seed) {
  if (k < 1) throw ConfigError("partition count must be >= 1");
  std::vector<ClassPartition> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    out.push_back(sample_partition(num_classes, test_count,
                                   SeedSpec{base_seed, static_cast<std::uint64_t>(i)}));
  return out;
}

// Subset size for proportion s of a training class pool: round half up, with
// a floor of 2 so ranking losses and the ESZSL label matrix stay non-degenerate.
inline std::size_t subset_size(std::size_t pool_size, double s) {
  const auto rounded = static_cast<std::size_t>(std::floor(s * static_cast<double>(pool_size) + 0.5));
  return std::max<std::size_t>(2, rounded);
}

// Uniform random subset of train_classes, without replacement. s = 1 returns
// the full set.
inline std::set<int> sample_subset_classes(const std::set<int>& train_classes, double s,
                                           SeedSpec seed) {
  if (!(s > 0.0) || s > 1.0)
    throw ConfigError("subset proportion must be in (0, 1], got " + std::to_string(s));
  if (train_classes.size() < 2)
    throw ConfigError("need at least 2 training classes to subsample");
  if (s == 1.0) return train_classes;
  const std::size_t target = std::min(subset_size(train_classes.size(), s), train_classes.size());
  std::vector<int> pool(train_classes.begin(), train_classes.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  return std::set<int>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target));
}

}  // namespace zsc
