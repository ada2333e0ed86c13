#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gtbo/cli.hpp"

namespace gtbo::cli {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// A YAML mapping plus its dotted path, for error messages and unknown-key checks.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where() + " must be a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key) + " has the wrong type");
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!has(key) || node_[key].IsNull()) return;
    T v{};
    read(key, v);
    out = v;
  }

  std::string read_string(const std::string& key, const std::string& fallback) {
    std::string s = fallback;
    read(key, s);
    return s;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(has(key) ? node_[key] : YAML::Node(), key_path(key));
  }

  void reject_unknown() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown configuration key '" + key_path(key) + "'");
    }
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_prior(Section s, surrogate::LogNormalPrior& p) {
  s.read("mu", p.mu);
  s.read("sigma", p.sigma);
  s.reject_unknown();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view name(Method m) { return m == Method::Gtbo ? "gtbo" : "random_search"; }

std::string_view name(SweepAxis a) {
  switch (a) {
    case SweepAxis::NoiseStd: return "noise_std";
    case SweepAxis::AmbientDim: return "ambient_dim";
    case SweepAxis::ActiveDim: return "active_dim";
    case SweepAxis::MaxBatch: return "max_batch";
    case SweepAxis::PriorQ: return "prior_q";
    case SweepAxis::MaxAct: return "max_act";
    case SweepAxis::Particles: return "particles";
    case SweepAxis::InactivePriorMu: return "inactive_prior_mu";
  }
  return "";
}

SweepAxis parse_sweep_axis(std::string_view s) {
  const auto key = lower(s);
  for (auto a : {SweepAxis::NoiseStd, SweepAxis::AmbientDim, SweepAxis::ActiveDim, SweepAxis::MaxBatch,
                 SweepAxis::PriorQ, SweepAxis::MaxAct, SweepAxis::Particles, SweepAxis::InactivePriorMu})
    if (name(a) == key) return a;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");

  const auto method = lower(top.read_string("method", "gtbo"));
  if (method == "gtbo")
    c.method = Method::Gtbo;
  else if (method == "random_search")
    c.method = Method::RandomSearch;
  else
    throw ConfigError("method must be 'gtbo' or 'random_search'");

  top.read("seeds", c.seeds);
  std::string out = c.output_dir.string();
  top.read("output_dir", out);
  c.output_dir = out;
  top.read("jobs", c.jobs);

  {
    auto b = top.child("benchmark");
    c.benchmark.function = objective::parse_base_function(b.read_string("function", "branin2"));
    b.read("ambient_dim", c.benchmark.ambient_dim);
    b.read("active_indices", c.benchmark.active_indices);
    b.read("effective_dim", c.benchmark.effective_dim);
    b.read("noise_std", c.benchmark.noise_std);
    const auto mode = lower(b.read_string("default_point", "auto"));
    if (mode == "center")
      c.benchmark.default_mode = objective::DefaultMode::Center;
    else if (mode == "random")
      c.benchmark.default_mode = objective::DefaultMode::Random;
    else if (mode != "auto")
      throw ConfigError("benchmark.default_point must be 'auto', 'center' or 'random'");
    b.read("fail_after", c.benchmark.fail_after);
    b.reject_unknown();
  }
  {
    auto g = top.child("gt");
    auto& gt = c.gt;
    g.read("max_tests", gt.max_tests);
    g.read("particles", gt.particles);
    g.read("prior_q", gt.prior_q);
    g.read("eta", gt.eta);
    g.read("c_lower", gt.c_lower);
    g.read("c_upper", gt.c_upper);
    g.read("max_batch", gt.max_batch);
    g.read("mi_drop", gt.mi_drop);
    g.read("starts", gt.starts);
    g.read("mc_samples", gt.mc_samples);
    g.read("n_def", gt.n_def);
    g.read("max_act", gt.max_act);
    g.read("variance_floor", gt.variance_floor);
    g.read("variance_of_signed_deviation", gt.signed_deviation);
    g.read("ess_threshold", gt.ess_threshold);
    g.read("gibbs_sweeps", gt.gibbs_sweeps);
    g.read("min_distance", gt.min_distance);
    g.reject_unknown();
  }
  {
    auto b = top.child("bo");
    auto& o = c.bo.options;
    b.read("budget", c.bo.budget);
    b.read("raw_candidates", o.acquisition.raw_candidates);
    b.read("refine_starts", o.acquisition.refine_starts);
    b.read("refine_iterations", o.acquisition.refine_iterations);
    b.read("fit_restarts", o.initial_fit.restarts);
    b.read("fit_iterations", o.initial_fit.max_iterations);
    b.read("refit_restarts", o.refit.restarts);
    b.read("refit_iterations", o.refit.max_iterations);
    b.read("dedupe_tol", o.dedupe_tol);
    auto p = b.child("priors");
    read_prior(p.child("active_lengthscale"), o.priors.active_lengthscale);
    read_prior(p.child("inactive_lengthscale"), o.priors.inactive_lengthscale);
    read_prior(p.child("noise_variance"), o.priors.noise_variance);
    read_prior(p.child("signal_variance"), o.priors.signal_variance);
    p.reject_unknown();
    b.reject_unknown();
  }
  {
    auto s = top.child("sweep");
    if (s.has("axis")) c.sweep.axis = parse_sweep_axis(s.read_string("axis", ""));
    s.read("values", c.sweep.values);
    s.reject_unknown();
  }
  top.reject_unknown();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const RunConfig& c) {
  require(!c.seeds.empty(), "seeds must list at least one seed");
  {
    auto sorted = c.seeds;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "seeds must be distinct");
  }
  require(!c.output_dir.empty(), "output_dir must not be empty");

  const auto& b = c.benchmark;
  require(b.ambient_dim >= 4 && b.ambient_dim <= 100000, "benchmark.ambient_dim must lie in [4, 100000]");
  if (b.noise_std) require(std::isfinite(*b.noise_std) && *b.noise_std >= 0.0, "benchmark.noise_std must be >= 0");
  if (!b.active_indices.empty()) {
    objective::BenchmarkSpec probe{b.function, b.ambient_dim, b.active_indices, b.noise_std.value_or(0.0)};
    probe.validate();
    require(b.effective_dim == 0 || b.effective_dim == b.active_indices.size(),
            "benchmark.effective_dim disagrees with benchmark.active_indices");
  } else {
    const std::size_t d = b.effective_dim == 0 ? objective::nominal_dim(b.function) : b.effective_dim;
    require(b.effective_dim == 0 || objective::supports_variable_dim(b.function) ||
                b.effective_dim == objective::nominal_dim(b.function),
            std::string(objective::name(b.function)) + " has a fixed dimensionality");
    require(d <= b.ambient_dim, "benchmark.effective_dim exceeds benchmark.ambient_dim");
  }

  c.gt.validate();
  if (c.gt.max_act != 0) {
    const std::size_t bins = bin_count(b.ambient_dim);
    require(c.gt.max_act >= 2 && c.gt.max_act + 2 <= bins,
            "gt.max_act must lie in [2, bins - 2] with bins = 3 floor(sqrt(ambient_dim))");
  }
  require(c.gt.max_tests <= 100000, "gt.max_tests must be at most 100000");
  require(c.gt.particles <= 10000000, "gt.particles must be at most 1e7");

  const auto& o = c.bo.options;
  require(o.acquisition.raw_candidates >= 1, "bo.raw_candidates must be at least 1");
  require(o.acquisition.refine_starts >= 1, "bo.refine_starts must be at least 1");
  require(o.initial_fit.restarts >= 1 && o.refit.restarts >= 1, "bo fit restarts must be at least 1");
  require(o.dedupe_tol > 0.0, "bo.dedupe_tol must be positive");
  for (const auto* p : {&o.priors.active_lengthscale, &o.priors.inactive_lengthscale, &o.priors.noise_variance,
                        &o.priors.signal_variance})
    require(std::isfinite(p->mu) && p->sigma > 0.0 && std::isfinite(p->sigma),
            "bo.priors need finite mu and positive sigma");

  if (c.sweep.axis) require(!c.sweep.values.empty(), "sweep.values must list at least one value");
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
  if (config.output_dir.is_absolute()) return config.output_dir;
  if (const char* root = std::getenv("GTBO_OUTPUT_ROOT"); root && *root)
    return std::filesystem::path(root) / config.output_dir;
  return config.output_dir;
}

}  // namespace gtbo::cli
