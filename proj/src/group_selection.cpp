#include "gtbo/group_selection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace gtbo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Local search state for one start: the group, each particle's number of
// active members inside it, and the resulting hit probability.
class SearchState {
 public:
  SearchState(const ParticlePosterior& ps, DimMask group) : ps_(ps), group_(std::move(group)) {
    counts_.resize(ps.size());
    const auto g = group_.words();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto p = ps.particle_words(k);
      int c = 0;
      for (std::size_t w = 0; w < p.size(); ++w) c += std::popcount(p[w] & g[w]);
      counts_[k] = c;
    }
  }

  const DimMask& group() const { return group_; }

  double p_active() const {
    double p = 0.0;
    const auto w = ps_.weights();
    for (std::size_t k = 0; k < counts_.size(); ++k)
      if (counts_[k] > 0) p += w[k];
    return std::clamp(p, 0.0, 1.0);
  }

  // gain[i] = probability mass that becomes hit when i is added.
  std::vector<double> addition_gain() const {
    std::vector<double> gain(ps_.dims(), 0.0);
    const auto w = ps_.weights();
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      if (counts_[k] != 0) continue;
      const auto p = ps_.particle_words(k);
      for (std::size_t word = 0; word < p.size(); ++word) {
        auto bits = p[word];
        while (bits) {
          gain[word * 64 + static_cast<std::size_t>(std::countr_zero(bits))] += w[k];
          bits &= bits - 1;
        }
      }
    }
    return gain;
  }

  // loss[i] = probability mass whose only hit is i.
  std::vector<double> removal_loss() const {
    std::vector<double> loss(ps_.dims(), 0.0);
    const auto w = ps_.weights();
    const auto g = group_.words();
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      if (counts_[k] != 1) continue;
      const auto p = ps_.particle_words(k);
      for (std::size_t word = 0; word < p.size(); ++word) {
        if (auto bits = p[word] & g[word]) {
          loss[word * 64 + static_cast<std::size_t>(std::countr_zero(bits))] += w[k];
          break;
        }
      }
    }
    return loss;
  }

  void toggle(std::size_t i) {
    const bool adding = !group_.test(i);
    group_.assign(i, adding);
    const int delta = adding ? 1 : -1;
    for (std::size_t k = 0; k < counts_.size(); ++k)
      if (ps_.active(k, i)) counts_[k] += delta;
  }

 private:
  const ParticlePosterior& ps_;
  DimMask group_;
  std::vector<int> counts_;
};

bool contains_all(const DimMask& outer, const DimMask& inner) {
  const auto a = outer.words();
  const auto b = inner.words();
  for (std::size_t w = 0; w < a.size(); ++w)
    if ((b[w] & ~a[w]) != 0) return false;
  return true;
}

// Single dimension d with outer = inner + {d}, assuming the sizes differ by one.
std::size_t extra_member(const DimMask& outer, const DimMask& inner) {
  const auto a = outer.words();
  const auto b = inner.words();
  for (std::size_t w = 0; w < a.size(); ++w)
    if (auto diff = a[w] & ~b[w]) return w * 64 + static_cast<std::size_t>(std::countr_zero(diff));
  return outer.dims();
}

ScoredGroup local_search(const ParticlePosterior& ps, const MutualInformation& mi, DimMask start,
                         std::span<const DimMask> excluded) {
  const std::size_t dims = ps.dims();
  auto is_excluded = [&](const DimMask& g) {
    return std::find(excluded.begin(), excluded.end(), g) != excluded.end();
  };
  SearchState state(ps, std::move(start));
  auto score_current = [&] {
    if (state.group().none() || is_excluded(state.group())) return kNegInf;
    return mi(state.p_active());
  };
  double current = score_current();

  bool changed = true;
  while (changed) {
    changed = false;

    // Forward phase.
    for (;;) {
      const std::size_t size = state.group().count();
      std::vector<char> forbidden(dims, 0);
      for (const auto& e : excluded)
        if (e.count() == size + 1 && contains_all(e, state.group()))
          forbidden[extra_member(e, state.group())] = 1;
      const double p = state.p_active();
      const auto gain = state.addition_gain();
      double best = kNegInf;
      std::size_t best_i = dims;
      for (std::size_t i = 0; i < dims; ++i) {
        if (state.group().test(i) || forbidden[i]) continue;
        const double s = mi(p + gain[i]);
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      if (best_i == dims || !(best > current)) break;
      state.toggle(best_i);
      current = best;
      changed = true;
    }

    // Backward phase; never empties the group.
    for (;;) {
      const std::size_t size = state.group().count();
      if (size <= 1) break;
      std::vector<char> forbidden(dims, 0);
      for (const auto& e : excluded)
        if (e.count() + 1 == size && contains_all(state.group(), e))
          forbidden[extra_member(state.group(), e)] = 1;
      const double p = state.p_active();
      const auto loss = state.removal_loss();
      double best = kNegInf;
      std::size_t best_i = dims;
      for (auto i : state.group().indices()) {
        if (forbidden[i]) continue;
        const double s = mi(p - loss[i]);
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      if (best_i == dims || !(best > current)) break;
      state.toggle(best_i);
      current = best;
      changed = true;
    }
  }
  if (current == kNegInf) return {DimMask(dims), kNegInf};
  return {state.group(), current};
}

}  // namespace

bool better_group(const ScoredGroup& a, const ScoredGroup& b) {
  if (a.mi != b.mi) return a.mi > b.mi;
  const auto ca = a.group.count();
  const auto cb = b.group.count();
  if (ca != cb) return ca < cb;
  const auto ia = a.group.indices();
  const auto ib = b.group.indices();
  return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end());
}

std::vector<DimMask> make_starts(const ParticlePosterior& ps, std::size_t count, Rng& rng) {
  std::vector<DimMask> starts;
  starts.reserve(count);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t s = 0; s < count; ++s) {
    if (s == 0) {
      starts.emplace_back(ps.dims());
    } else if (s % 2 == 1) {
      DimMask m(ps.dims());
      const auto q = ps.prior_q();
      for (std::size_t i = 0; i < ps.dims(); ++i)
        if (u(rng) < q[i]) m.set(i);
      starts.push_back(std::move(m));
    } else {
      starts.push_back(ps.particle(ps.sample_index(rng)));
    }
  }
  return starts;
}

ScoredGroup forward_backward(const ParticlePosterior& ps, const MutualInformation& mi,
                             std::span<const DimMask> starts, std::span<const DimMask> excluded) {
  if (starts.empty()) throw std::invalid_argument("forward_backward needs at least one start");
  ScoredGroup best{DimMask(ps.dims()), kNegInf};
  for (const auto& start : starts) {
    if (start.dims() != ps.dims()) throw std::invalid_argument("start dimension mismatch");
    auto candidate = local_search(ps, mi, start, excluded);
    if (!candidate.valid() || candidate.mi == kNegInf) continue;
    if (!best.valid() || better_group(candidate, best)) best = std::move(candidate);
  }
  return best;
}

std::vector<ScoredGroup> select_batch(const ParticlePosterior& ps, const NoiseModel& nm,
                                      const SelectionOptions& options, Rng& rng) {
  if (options.max_batch == 0) throw ConfigError("max_batch must be at least 1");
  if (!(options.mi_drop > 0.0 && options.mi_drop <= 1.0)) throw ConfigError("mi_drop must lie in (0,1]");
  const MutualInformation mi(nm, options.mc_samples, rng);
  std::vector<ScoredGroup> batch;
  std::vector<DimMask> excluded;
  while (batch.size() < options.max_batch) {
    const auto starts = make_starts(ps, options.starts, rng);
    auto pick = forward_backward(ps, mi, starts, excluded);
    if (!pick.valid()) break;
    if (!batch.empty() && pick.mi < (1.0 - options.mi_drop) * batch.front().mi) break;
    excluded.push_back(pick.group);
    batch.push_back(std::move(pick));
  }
  return batch;
}

}  // namespace gtbo
