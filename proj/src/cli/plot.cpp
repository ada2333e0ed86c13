#include <fmt/format.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gtbo/cli.hpp"

namespace gtbo::cli {

namespace fs = std::filesystem;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + p.string() + "' is empty");
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ConfigError("malformed number '" + s + "'");
  }
}

// Seed directories below `dir`, or `dir` itself if it holds `marker`.
std::vector<fs::path> seed_dirs(const fs::path& dir, const std::string& marker) {
  std::vector<fs::path> out;
  if (fs::exists(dir / marker)) return {dir};
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 && fs::exists(e.path() / marker))
      out.push_back(e.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    const auto sa = a.filename().string().substr(5), sb = b.filename().string().substr(5);
    return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
  });
  return out;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  std::vector<double> band_lo, band_hi;
  double width = 1.2;
  double opacity = 1.0;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};

class Figure {
 public:
  Figure(std::string title, std::string xlabel, std::string ylabel, bool log_y = false)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), log_y_(log_y) {}

  void add(Series s) { series_.push_back(std::move(s)); }
  void set_y_range(double lo, double hi) { y_range_ = {lo, hi}; }
  void add_source(const fs::path& p) { sources_.push_back(p.generic_string()); }

  std::string render() const {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        const double lo = s.band_lo.empty() ? s.y[i] : s.band_lo[i];
        const double hi = s.band_hi.empty() ? s.y[i] : s.band_hi[i];
        y0 = std::min(y0, ty(lo));
        y1 = std::max(y1, ty(hi));
      }
    }
    if (y_range_) {
      y0 = ty(y_range_->first);
      y1 = ty(y_range_->second);
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;

    const double W = 720, H = 440, L = 70, R = 170, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };

    std::string svg;
    svg += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n", W,
                       H, W, H);
    for (const auto& src : sources_) svg += fmt::format("<!-- data: {} -->\n", src);
    svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
    svg += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
                       (W - R + L) / 2, title_);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", L, T,
                       W - L - R, H - T - B);
    for (int k = 0; k <= 4; ++k) {
      const double xv = x0 + (x1 - x0) * k / 4.0;
      const double yv = y0 + (y1 - y0) * k / 4.0;
      const double gx = L + (W - L - R) * k / 4.0;
      const double gy = H - B - (H - T - B) * k / 4.0;
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.4g}</text>\n",
                         gx, H - B + 16, xv);
      svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n",
                         L - 6, gy + 4, log_y_ ? std::pow(10.0, yv) : yv);
      svg += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#e0e0e0\"/>\n", L, gy, W - R, gy);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                       (W - R + L) / 2, H - 12, xlabel_);
    svg += fmt::format("<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
                       "transform=\"rotate(-90 16 {})\">{}</text>\n",
                       (H - B + T) / 2, (H - B + T) / 2, ylabel_);

    for (const auto& s : series_) {
      if (!s.band_lo.empty() && !s.x.empty()) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.band_hi[i]));
        for (std::size_t i = s.x.size(); i-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.band_lo[i]));
        svg += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", pts, s.color);
      }
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-opacity=\"{}\"/>\n",
                         pts, s.color, s.width, s.opacity);
    }
    // Legend, one entry per distinct label.
    std::vector<std::pair<std::string, std::string>> legend;
    for (const auto& s : series_)
      if (!s.label.empty() && std::none_of(legend.begin(), legend.end(), [&](auto& e) { return e.first == s.label; }))
        legend.emplace_back(s.label, s.color);
    for (std::size_t k = 0; k < legend.size(); ++k) {
      const double y = T + 12 + 18.0 * static_cast<double>(k);
      svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", W - R + 12, y,
                         W - R + 32, y, legend[k].second);
      svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n", W - R + 38,
                         y + 4, legend[k].first);
    }
    svg += "</svg>\n";
    return svg;
  }

 private:
  double ty(double y) const { return log_y_ ? std::log10(std::max(y, 1e-12)) : y; }

  std::string title_, xlabel_, ylabel_;
  bool log_y_;
  std::vector<Series> series_;
  std::optional<std::pair<double, double>> y_range_;
  std::vector<std::string> sources_;
};

std::vector<std::vector<double>> read_marginals(const fs::path& p) {
  const auto t = read_csv(p / "marginals.csv");
  std::vector<std::vector<double>> rows;
  for (const auto& r : t.rows) {
    std::vector<double> v;
    for (std::size_t k = 1; k < r.size(); ++k) v.push_back(to_double(r[k]));
    rows.push_back(std::move(v));
  }
  return rows;
}

// Ground-truth active indices and eta from summary.json, when present.
std::pair<std::vector<std::size_t>, double> read_truth(const fs::path& seed_dir) {
  std::ifstream in(seed_dir / "summary.json");
  if (!in) return {{}, 0.5};
  try {
    const auto j = nlohmann::json::parse(in);
    std::vector<std::size_t> truth = j.at("benchmark").at("active_indices").get<std::vector<std::size_t>>();
    const double eta = j.at("gt").is_null() ? 0.5 : j.at("gt").at("eta").get<double>();
    return {truth, eta};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("malformed '" + (seed_dir / "summary.json").string() + "'");
  }
}

fs::path relative_to(const fs::path& p, const fs::path& base) { return fs::relative(p, base); }

struct Output {
  fs::path path;
  std::string svg;
};

std::vector<Output> plot_marginals(const fs::path& dir) {
  const auto seeds = seed_dirs(dir, "marginals.csv");
  if (seeds.empty()) throw ConfigError("no marginals.csv found under '" + dir.string() + "'");
  std::vector<Output> out;
  for (const auto& sd : seeds) {
    const auto rows = read_marginals(sd);
    const auto [truth, eta] = read_truth(sd);
    if (rows.empty()) throw ConfigError("'" + (sd / "marginals.csv").string() + "' has no rows");
    const std::size_t D = rows.front().size();
    Figure fig("Marginal activity probabilities (" + sd.filename().string() + ")", "test", "P(active)");
    fig.add_source(relative_to(sd / "marginals.csv", dir));
    fig.set_y_range(0.0, 1.0);
    for (int pass = 0; pass < 2; ++pass) {
      // Inactive curves first so active ones are drawn on top.
      for (std::size_t i = 0; i < D; ++i) {
        const bool active = std::find(truth.begin(), truth.end(), i) != truth.end();
        if (active != (pass == 1)) continue;
        Series s;
        s.label = active ? "active" : (truth.empty() ? "" : "inactive");
        s.color = active ? "#2ca02c" : "#7f7f7f";
        s.width = active ? 2.0 : 0.8;
        s.opacity = active ? 1.0 : 0.5;
        for (std::size_t t = 0; t < rows.size(); ++t) {
          s.x.push_back(static_cast<double>(t));
          s.y.push_back(rows[t][i]);
        }
        fig.add(std::move(s));
      }
    }
    out.push_back({dir / "plots" / ("marginals_" + sd.filename().string() + ".svg"), fig.render()});
  }
  return out;
}

std::vector<Output> plot_active_count(const fs::path& dir) {
  const auto seeds = seed_dirs(dir, "marginals.csv");
  if (seeds.empty()) throw ConfigError("no marginals.csv found under '" + dir.string() + "'");
  Figure fig("Dimensions classified active", "test", "count with P(active) >= eta");
  std::size_t k = 0;
  for (const auto& sd : seeds) {
    const auto rows = read_marginals(sd);
    const double eta = read_truth(sd).second;
    fig.add_source(relative_to(sd / "marginals.csv", dir));
    Series s;
    s.label = sd.filename().string();
    s.color = kPalette[k++ % std::size(kPalette)];
    for (std::size_t t = 0; t < rows.size(); ++t) {
      s.x.push_back(static_cast<double>(t));
      s.y.push_back(static_cast<double>(std::count_if(rows[t].begin(), rows[t].end(), [&](double m) { return m >= eta; })));
    }
    fig.add(std::move(s));
  }
  return {{dir / "plots" / "active_count.svg", fig.render()}};
}

std::vector<Output> plot_regret(const fs::path& dir) {
  // One curve per experiment: `dir` itself, or each subdirectory holding seeds.
  std::vector<std::pair<std::string, std::vector<fs::path>>> groups;
  if (auto s = seed_dirs(dir, "trace.csv"); !s.empty()) {
    groups.emplace_back(dir.filename().string(), s);
  } else if (fs::is_directory(dir)) {
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) subs.push_back(e.path());
    std::sort(subs.begin(), subs.end());
    for (const auto& sub : subs)
      if (auto s = seed_dirs(sub, "trace.csv"); !s.empty()) groups.emplace_back(sub.filename().string(), s);
  }
  if (groups.empty()) throw ConfigError("no trace.csv found under '" + dir.string() + "'");

  Figure fig("Simple regret (mean and one standard error)", "evaluation", "regret", true);
  std::size_t k = 0;
  for (const auto& [label, seeds] : groups) {
    std::vector<std::vector<double>> curves;
    for (const auto& sd : seeds) {
      const auto t = read_csv(sd / "trace.csv");
      const auto col = t.column("regret");
      std::vector<double> c;
      for (const auto& r : t.rows) c.push_back(to_double(r.at(col)));
      curves.push_back(std::move(c));
      fig.add_source(relative_to(sd / "trace.csv", dir));
    }
    std::size_t n = curves.front().size();
    for (const auto& c : curves) n = std::min(n, c.size());
    Series s;
    s.label = label;
    s.color = kPalette[k++ % std::size(kPalette)];
    s.width = 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (const auto& c : curves) mean += c[i];
      mean /= static_cast<double>(curves.size());
      double var = 0.0;
      for (const auto& c : curves) var += (c[i] - mean) * (c[i] - mean);
      const double se = curves.size() > 1 ? std::sqrt(var / static_cast<double>(curves.size() - 1) /
                                                      static_cast<double>(curves.size()))
                                          : 0.0;
      s.x.push_back(static_cast<double>(i + 1));
      s.y.push_back(mean);
      s.band_lo.push_back(mean - se);
      s.band_hi.push_back(mean + se);
    }
    fig.add(std::move(s));
  }
  return {{dir / "plots" / "regret.svg", fig.render()}};
}

std::vector<Output> plot_sensitivity(const fs::path& dir) {
  const fs::path src = dir / "sweep.csv";
  if (!fs::exists(src)) throw ConfigError("no sweep.csv in '" + dir.string() + "'");
  const auto t = read_csv(src);
  const auto c_axis = t.column("axis"), c_value = t.column("value"), c_it = t.column("iteration"),
             c_pct = t.column("correct_pct_mean");
  if (t.rows.empty()) throw ConfigError("'" + src.string() + "' has no rows");
  std::vector<std::string> order;
  std::map<std::string, Series> by_value;
  for (const auto& r : t.rows) {
    const auto& v = r.at(c_value);
    if (!by_value.count(v)) {
      order.push_back(v);
      Series s;
      s.label = r.at(c_axis) + " = " + v;
      s.color = kPalette[(order.size() - 1) % std::size(kPalette)];
      s.width = 2.0;
      by_value[v] = s;
    }
    by_value[v].x.push_back(to_double(r.at(c_it)));
    by_value[v].y.push_back(to_double(r.at(c_pct)));
  }
  Figure fig("Correct classification during group testing", "test", "correctly classified (%)");
  fig.add_source("sweep.csv");
  fig.set_y_range(0.0, 100.0);
  for (const auto& v : order) fig.add(by_value[v]);
  return {{dir / "plots" / "sensitivity.svg", fig.render()}};
}

}  // namespace

PlotKind parse_plot_kind(std::string_view s) {
  if (s == "marginals") return PlotKind::Marginals;
  if (s == "regret") return PlotKind::Regret;
  if (s == "sensitivity") return PlotKind::Sensitivity;
  if (s == "active_count") return PlotKind::ActiveCount;
  throw ConfigError("unknown plot kind '" + std::string(s) + "'");
}

std::vector<fs::path> plot(const fs::path& results_dir, PlotKind kind) {
  if (!fs::is_directory(results_dir)) throw ConfigError("results directory '" + results_dir.string() + "' does not exist");
  std::vector<Output> outputs;
  switch (kind) {
    case PlotKind::Marginals: outputs = plot_marginals(results_dir); break;
    case PlotKind::Regret: outputs = plot_regret(results_dir); break;
    case PlotKind::Sensitivity: outputs = plot_sensitivity(results_dir); break;
    case PlotKind::ActiveCount: outputs = plot_active_count(results_dir); break;
  }
  // Everything is rendered before the first file is written.
  fs::create_directories(results_dir / "plots");
  std::vector<fs::path> written;
  for (const auto& o : outputs) {
    std::ofstream f(o.path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + o.path.string() + "'");
    f << o.svg;
    written.push_back(o.path);
  }
  return written;
}

}  // namespace gtbo::cli
