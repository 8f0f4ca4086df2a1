#include "confsteer/svg_plot.hpp"

#include "confsteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace confsteer {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag)
      return m * mag;
  return 10.0 * mag;
}

} // namespace

std::string render_svg(const Plot &plot) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto &s : plot.series) {
    for (double x : s.x)
      if (std::isfinite(x)) {
        xlo = std::min(xlo, x);
        xhi = std::max(xhi, x);
      }
    for (const auto *ys : {&s.y, &s.y_hi})
      for (double y : *ys)
        if (std::isfinite(y)) {
          ylo = std::min(ylo, y);
          yhi = std::max(yhi, y);
        }
  }
  if (!std::isfinite(xlo)) {
    xlo = 0;
    xhi = 1;
  }
  if (!std::isfinite(ylo)) {
    ylo = 0;
    yhi = 1;
  }
  auto [x0, x1] = plot.x_range ? *plot.x_range : padded(xlo, xhi);
  auto [y0, y1] = plot.y_range ? *plot.y_range : padded(ylo, yhi);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(plot.title) << "</text>\n";

  // axes and ticks
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double xs = nice_step(x1 - x0), ys = nice_step(y1 - y0);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs)
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(t))
      << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/><text x=\"" << num(px(t))
      << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">" << tick_label(t)
      << "</text>\n";
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys)
    o << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(kLeft)
      << "\" y2=\"" << num(py(t)) << "\" stroke=\"black\"/><text x=\"" << num(kLeft - 8)
      << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << tick_label(t)
      << "</text>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
    << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(18 " << num(kTop + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";

  if (plot.diagonal) {
    const double lo = std::max(x0, y0), hi = std::min(x1, y1);
    if (lo < hi)
      o << "<line x1=\"" << num(px(lo)) << "\" y1=\"" << num(py(lo)) << "\" x2=\"" << num(px(hi))
        << "\" y2=\"" << num(py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto &s = plot.series[si];
    const char *color = kPalette[si % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.style == SeriesStyle::band) {
      o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < n; ++i)
        o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      for (std::size_t i = std::min(n, s.y_hi.size()); i-- > 0;)
        o << num(px(s.x[i])) << ',' << num(py(s.y_hi[i])) << ' ';
      o << "\"/>\n";
    } else {
      if (s.style != SeriesStyle::markers && n > 1) {
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < n; ++i)
          if (std::isfinite(s.y[i]))
            o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
        o << "\"/>\n";
      }
      if (s.style != SeriesStyle::line)
        for (std::size_t i = 0; i < n; ++i)
          if (std::isfinite(s.y[i]))
            o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(si);
    o << "<rect x=\"" << num(kWidth - kRight + 12) << "\" y=\"" << num(ly - 8)
      << "\" width=\"12\" height=\"10\" fill=\"" << color << "\"/><text x=\""
      << num(kWidth - kRight + 30) << "\" y=\"" << num(ly + 1) << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::filesystem::path &path, const Plot &plot) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write plot '" + path.string() + "'");
  out << render_svg(plot);
}

} // namespace confsteer
