#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gtbo/common.hpp"
#include "gtbo/information.hpp"
#include "gtbo/particles.hpp"

namespace gtbo {

struct ScoredGroup {
  DimMask group;
  double mi = 0.0;

  bool valid() const { return !group.none(); }
};

struct SelectionOptions {
  std::size_t starts = 3;
  std::size_t max_batch = 5;
  double mi_drop = 0.01;
  std::size_t mc_samples = 2048;
};

/// Strict ordering used to pick among equally informative groups: higher MI,
/// then fewer members, then lexicographically smaller index list.
bool better_group(const ScoredGroup& a, const ScoredGroup& b);

/// Initial groups for the local search: an empty group, one drawn entrywise
/// from the prior, one drawn as a particle from the posterior; further starts
/// alternate prior and posterior draws.
std::vector<DimMask> make_starts(const ParticlePosterior& ps, std::size_t count, Rng& rng);

/// Multi-start forward-backward greedy maximization of MI over group masks.
/// Groups in `excluded` score -inf. Returns an empty group when no start
/// produces a valid, non-excluded group.
ScoredGroup forward_backward(const ParticlePosterior& ps, const MutualInformation& mi,
                             std::span<const DimMask> starts, std::span<const DimMask> excluded = {});

/// Greedy batch: reruns the search with earlier picks excluded until the batch
/// is full or a pick's MI falls below (1 - mi_drop) times the first pick's MI.
std::vector<ScoredGroup> select_batch(const ParticlePosterior& ps, const NoiseModel& nm,
                                      const SelectionOptions& options, Rng& rng);

}  // namespace gtbo
