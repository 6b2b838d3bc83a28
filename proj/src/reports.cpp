#include "nsca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nsca {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  return out;
}

std::size_t class_columns(const std::vector<MetricsRecord>& runs) {
  std::size_t n = 0;
  for (const auto& r : runs) n = std::max(n, r.source_only.per_class.size());
  return n;
}

void per_class_cells(std::ostream& out, const Evaluation& e, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) out << ',' << (k < e.per_class.size() ? e.per_class[k] : 0.0);
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& runs) {
  auto out = open_csv(path);
  const std::size_t n = class_columns(runs);
  out << "config_hash,seed,epoch,alpha,mean_loss,overall_acc,class_avg_acc";
  for (std::size_t k = 0; k < n; ++k) out << ",acc_class_" << k;
  out << '\n';
  for (const auto& r : runs)
    for (const auto& e : r.epochs) {
      out << r.config_hash << ',' << r.seed << ',' << e.epoch << ',' << e.alpha << ','
          << e.mean_loss << ',' << e.eval.overall << ',' << e.eval.class_average;
      per_class_cells(out, e.eval, n);
      out << '\n';
    }
}

void write_final_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& runs) {
  auto out = open_csv(path);
  const std::size_t n = class_columns(runs);
  out << "config_hash,seed,arm";
  for (std::size_t k = 0; k < n; ++k) out << ",class_" << k;
  out << ",avg,overall\n";
  auto row = [&](const std::string& hash, const std::string& seed, const char* arm,
                 const Evaluation& e) {
    out << hash << ',' << seed << ',' << arm;
    per_class_cells(out, e, n);
    out << ',' << e.class_average << ',' << e.overall << '\n';
  };
  for (const auto& r : runs) {
    row(r.config_hash, std::to_string(r.seed), "source_only", r.source_only);
    row(r.config_hash, std::to_string(r.seed), "adapted", r.final);
  }
  if (runs.size() > 1) {
    auto average = [&](auto pick) {
      Evaluation m;
      m.per_class.assign(n, 0.0);
      for (const auto& r : runs) {
        const Evaluation& e = pick(r);
        for (std::size_t k = 0; k < e.per_class.size(); ++k) m.per_class[k] += e.per_class[k];
        m.class_average += e.class_average;
        m.overall += e.overall;
      }
      const auto count = static_cast<double>(runs.size());
      for (auto& v : m.per_class) v /= count;
      m.class_average /= count;
      m.overall /= count;
      return m;
    };
    row(runs.front().config_hash, "mean", "source_only",
        average([](const MetricsRecord& r) -> const Evaluation& { return r.source_only; }));
    row(runs.front().config_hash, "mean", "adapted",
        average([](const MetricsRecord& r) -> const Evaluation& { return r.final; }));
  }
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  auto out = open_csv(path);
  out << "variant,config_hash,disable_m2,disable_inertia,disable_class_scaling,"
         "disable_adaptive_encoding,mean_acc,std_acc,mean_class_avg,mean_source_only,per_seed_acc\n";
  for (const auto& row : rows) {
    std::vector<double> acc, avg, base;
    for (const auto& r : row.runs) {
      acc.push_back(r.final.overall);
      avg.push_back(r.final.class_average);
      base.push_back(r.source_only.overall);
    }
    const auto& a = row.config.ablation;
    out << row.name << ',' << config_hash(row.config) << ',' << a.disable_m2 << ','
        << a.disable_inertia << ',' << a.disable_class_scaling << ','
        << a.disable_adaptive_encoding << ',' << mean(acc) << ',' << stddev(acc) << ','
        << mean(avg) << ',' << mean(base) << ',';
    for (std::size_t i = 0; i < acc.size(); ++i) out << (i ? ";" : "") << acc[i];
    out << '\n';
  }
}

void write_sweep_csv(const std::filesystem::path& path, SweepParameter parameter,
                     const std::vector<SweepPoint>& points) {
  auto out = open_csv(path);
  out << "parameter,value,config_hash,mean_acc,std_acc,per_seed_acc\n";
  for (const auto& p : points) {
    std::vector<double> acc;
    for (const auto& r : p.runs) acc.push_back(r.final.overall);
    out << to_string(parameter) << ',' << p.value << ',' << config_hash(p.config) << ','
        << mean(acc) << ',' << stddev(acc) << ',';
    for (std::size_t i = 0; i < acc.size(); ++i) out << (i ? ";" : "") << acc[i];
    out << '\n';
  }
}

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  const double pad = std::max(1.0, 0.1 * (y1 - y0));
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << escape_xml(title) << "</text>\n";
  constexpr int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double gx = x0 + (x1 - x0) * t / ticks;
    const double gy = y0 + (y1 - y0) * t / ticks;
    svg << "<line x1=\"" << px(gx) << "\" y1=\"" << top << "\" x2=\"" << px(gx) << "\" y2=\""
        << H - bottom << "\" stroke=\"#ddd\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << py(gy) << "\" x2=\"" << W - right
        << "\" y2=\"" << py(gy) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << px(gx) << "\" y=\"" << H - bottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << gx << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(gy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << gy << "</text>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right
      << "\" y2=\"" << H - bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 16
      << "\" text-anchor=\"middle\" font-size=\"13\">" << escape_xml(x_label) << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (top + H - bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (top + H - bottom) / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    const std::size_t n = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < n; ++i)
      svg << (i ? " " : "") << px(series[s].x[i]) << ',' << py(series[s].y[i]);
    svg << "\"/>\n";
    for (std::size_t i = 0; i < n; ++i)
      svg << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\"" << py(series[s].y[i])
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << W - right - 4 << "\" y=\"" << top + 16 * (s + 1)
        << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
        << escape_xml(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace nsca
