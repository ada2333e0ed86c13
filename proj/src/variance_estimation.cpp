#include "gtbo/variance_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gtbo {

std::size_t bin_count(std::size_t dims) {
  return 3 * static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dims))));
}

double sample_variance(std::span<const double> values) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(n - 1);
}

double draw_far_coordinate(double center, double min_distance, Rng& rng) {
  if (std::max(center, 1.0 - center) < min_distance)
    throw std::invalid_argument("no coordinate in [0,1] is far enough from the default");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double v = u(rng);
    if (std::abs(v - center) >= min_distance) return v;
  }
}

VarianceEstimate estimate_noise_model(const Evaluator& f, const Point& x_def,
                                      const VarianceEstimationOptions& options, Rng& rng) {
  const std::size_t dims = x_def.size();
  if (dims < 4) throw ConfigError("variance estimation needs at least 4 dimensions");
  if (options.n_def < 2) throw ConfigError("n_def must be at least 2");
  const std::size_t bins = bin_count(dims);
  const std::size_t max_act =
      options.max_act == 0 ? bins / 3 : options.max_act;
  if (max_act < 2 || bins < max_act + 2)
    throw ConfigError("max_act leaves fewer than 2 samples in the noise or signal partition");

  VarianceEstimate out;
  out.model.n_def = options.n_def;
  out.model.max_act = max_act;

  double sum = 0.0;
  for (std::size_t i = 0; i < options.n_def; ++i) {
    const double y = f(x_def);
    sum += y;
    out.probes.push_back({Probe::Kind::Default, x_def, y, {}});
  }
  const double f_def_hat = sum / static_cast<double>(options.n_def);
  out.model.f_def_hat = f_def_hat;

  std::vector<std::size_t> order(dims);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = dims - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<double> deviations;
  deviations.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    // Near-equal contiguous chunks of the shuffled order.
    const std::size_t lo = b * dims / bins;
    const std::size_t hi = (b + 1) * dims / bins;
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(members.begin(), members.end());
    Point x = x_def;
    for (auto i : members) x[i] = draw_far_coordinate(x_def[i], options.min_distance, rng);
    const double y = f(x);
    out.probes.push_back({Probe::Kind::Bin, std::move(x), y, std::move(members)});
    deviations.push_back(y - f_def_hat);
  }

  // Order by magnitude; the smallest deviations feed the noise estimate.
  std::sort(deviations.begin(), deviations.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (!options.signed_deviation) {
    for (auto& d : deviations) d = std::abs(d);
  }
  const std::size_t n_noise = bins - max_act;
  const std::span<const double> all(deviations);
  const double noise_var = sample_variance(all.first(n_noise));
  const double signal_var = sample_variance(all.last(max_act));

  out.model.sigma_n_sq = std::max(noise_var, options.variance_floor);
  out.model.sigma_sq = std::max({signal_var, options.variance_floor, out.model.sigma_n_sq});
  return out;
}

}  // namespace gtbo
