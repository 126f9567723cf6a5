#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "tskf/driver.hpp"
#include "tskf/error.hpp"

namespace tskf {

namespace {

constexpr double kWidth = 880.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 46.0;

// Step of roughly `target` ticks on a 1-2-5 ladder.
double nice_step(double span, int target) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= f * mag) return f * mag;
  }
  return 10.0 * mag;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

Frame make_frame(const std::vector<double>& xs, const std::vector<const PlotSeries*>& series) {
  Frame f{xs.front(), xs.back(), 0.0, 0.0};
  bool first = true;
  for (const auto* s : series) {
    for (double v : s->values) {
      if (!std::isfinite(v)) continue;
      if (first) {
        f.y0 = f.y1 = v;
        first = false;
      }
      f.y0 = std::min(f.y0, v);
      f.y1 = std::max(f.y1, v);
    }
  }
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1.0;
  if (f.y1 <= f.y0) {
    f.y0 -= 1.0;
    f.y1 += 1.0;
  }
  const double pad = 0.05 * (f.y1 - f.y0);
  f.y0 -= pad;
  f.y1 += pad;
  return f;
}

void draw_axes(std::string& svg, const Frame& f, std::string_view xlabel) {
  const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
  svg += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"#444\"/>\n",
      left, top, right - left, bottom - top);
  const double xs = nice_step(f.x1 - f.x0, 8);
  for (double x = std::ceil(f.x0 / xs) * xs; x <= f.x1 + 1e-9 * xs; x += xs) {
    const double px = f.px(x);
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#444\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4:g}</text>\n",
        px, bottom, bottom + 5, bottom + 18, x);
  }
  const double ys = nice_step(f.y1 - f.y0, 6);
  for (double y = std::ceil(f.y0 / ys) * ys; y <= f.y1 + 1e-9 * ys; y += ys) {
    const double py = f.py(y);
    const double shown = std::abs(y) < 1e-12 * ys ? 0.0 : y;
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#444\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:g}</text>\n",
        left - 5, py, left, left - 8, py + 4, shown);
  }
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                     0.5 * (left + right), kHeight - 8, xlabel);
}

}  // namespace

std::vector<PlotSeries> plot_series(const FilterTrace& trace, Eigen::Index component) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptyInput, "trace has no records");
  if (component < 0 || component >= trace.records.front().x_hat.size()) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("state component {} out of range", component));
  }
  std::vector<PlotSeries> out{{"truth", {}}, {"estimate", {}}, {"est_error", {}}, {"meas_error", {}}};
  for (const auto& r : trace.records) {
    out[0].values.push_back(r.x_hat(component) + r.est_error(component));
    out[1].values.push_back(r.x_hat(component));
    // C (x - x_hat) = innovation - meas_error, in the units of output 0.
    out[2].values.push_back(r.innovation(0) - r.meas_error(0));
    out[3].values.push_back(r.meas_error(0));
  }
  return out;
}

std::vector<double> plot_abscissa(const FilterTrace& trace, PlotMode mode) {
  std::vector<double> xs;
  xs.reserve(trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    xs.push_back(mode == PlotMode::Iteration ? static_cast<double>(i) : trace.records[i].t);
  }
  return xs;
}

std::vector<std::size_t> plot_breaks(const FilterTrace& trace, PlotMode mode) {
  std::vector<std::size_t> breaks;
  if (mode == PlotMode::Iteration || trace.records.size() < 2) return breaks;
  const TimeScale ts = timescale_from_trace(trace);
  std::size_t i = 0;
  for (const Jump& j : ts.jumps()) {
    while (i + 1 < trace.records.size() && trace.records[i].t < j.from - kTimeTolerance) ++i;
    if (std::abs(trace.records[i].t - j.from) <= kTimeTolerance) breaks.push_back(i);
  }
  return breaks;
}

std::string render_svg(const FilterTrace& trace, PlotMode mode, std::string_view chart,
                       Eigen::Index component) {
  const auto all = plot_series(trace, component);
  std::vector<const PlotSeries*> shown;
  if (chart == "state") {
    shown = {&all[0], &all[1]};
  } else if (chart == "error") {
    shown = {&all[3], &all[2]};
  } else {
    throw Error(ErrorCode::UnsupportedFormat, fmt::format("unknown chart '{}'", chart));
  }
  const auto xs = plot_abscissa(trace, mode);
  const auto breaks = plot_breaks(trace, mode);
  const Frame f = make_frame(xs, shown);
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728"};

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:g}\" height=\"{1:g}\" "
      "viewBox=\"0 0 {0:g} {1:g}\" font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  draw_axes(svg, f, mode == PlotMode::Iteration ? "iteration" : "t");

  for (std::size_t s = 0; s < shown.size(); ++s) {
    const auto& v = shown[s]->values;
    const char* color = kColors[s];
    std::size_t b = 0;
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
                           color, points);
      }
      points.clear();
    };
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!points.empty()) points += ' ';
      fmt::format_to(std::back_inserter(points), "{:.2f},{:.2f}", f.px(xs[i]), f.py(v[i]));
      if (b < breaks.size() && breaks[b] == i) {
        flush();
        ++b;
      }
    }
    flush();
    if (mode == PlotMode::TimeScale) {
      // Circles on discrete points, small squares on interval samples.
      svg += fmt::format("<g fill=\"{}\">\n", color);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double px = f.px(xs[i]);
        const double py = f.py(v[i]);
        if (trace.records[i].origin == PointOrigin::DiscretePoint) {
          svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.2\"/>\n", px, py);
        } else {
          svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"1.6\" height=\"1.6\"/>\n",
                             px - 0.8, py - 0.8);
        }
      }
      svg += "</g>\n";
    }
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" "
        "stroke-width=\"2\"/><text x=\"{4:.2f}\" y=\"{5:.2f}\">{6}</text>\n",
        kLeft + 10 + 150.0 * static_cast<double>(s), kTop - 14, kLeft + 30 + 150.0 * static_cast<double>(s),
        color, kLeft + 35 + 150.0 * static_cast<double>(s), kTop - 10, shown[s]->name);
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_series_data(const FilterTrace& trace, PlotMode mode, const PlotSeries& series) {
  const auto xs = plot_abscissa(trace, mode);
  const auto breaks = plot_breaks(trace, mode);
  std::string out = "x,value\n";
  std::size_t b = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fmt::format_to(std::back_inserter(out), "{:.17g},{:.17g}\n", xs[i], series.values[i]);
    if (b < breaks.size() && breaks[b] == i) {
      out += '\n';
      ++b;
    }
  }
  return out;
}

std::vector<std::filesystem::path> emit_plots(const FilterTrace& trace, PlotMode mode,
                                              PlotFormat format,
                                              const std::filesystem::path& directory,
                                              std::string_view stem, Eigen::Index component) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptyInput, "trace has no records");
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const auto path = directory / name;
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()));
    written.push_back(path);
  };
  if (format == PlotFormat::Svg) {
    for (const char* chart : {"state", "error"}) {
      write(fmt::format("{}_{}_{}.svg", stem, to_string(mode), chart),
            render_svg(trace, mode, chart, component));
    }
  } else {
    for (const auto& s : plot_series(trace, component)) {
      write(fmt::format("{}_{}_{}.csv", stem, to_string(mode), s.name),
            render_series_data(trace, mode, s));
    }
  }
  return written;
}

}  // namespace tskf
