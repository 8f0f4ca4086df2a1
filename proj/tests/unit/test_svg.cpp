#include "doctest.h"
#include "support.hpp"

#include "confsteer/svg_plot.hpp"

#include <fstream>
#include <iterator>

using namespace confsteer;

namespace {

Plot sample() {
  Plot p;
  p.title = "R2 <by> layer & target";
  p.x_label = "layer";
  p.y_label = "R2";
  p.series.push_back({"test", {0, 1, 2}, {0.1, 0.5, 0.9}, {}, SeriesStyle::line_markers});
  p.series.push_back({"band", {0, 2}, {0.2, 0.2}, {0.4, 0.4}, SeriesStyle::band});
  p.diagonal = true;
  return p;
}

std::size_t count(const std::string &s, const std::string &needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1))
    ++n;
  return n;
}

} // namespace

TEST_SUITE("svg") {

TEST_CASE("document is well formed and escaped") {
  const std::string svg = render_svg(sample());
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("&lt;by&gt;") != std::string::npos);
  CHECK(svg.find("&amp;") != std::string::npos);
  CHECK(svg.find("<by>") == std::string::npos);
  CHECK(count(svg, "<text") == count(svg, "</text>"));
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("rendering is deterministic and written verbatim") {
  testutil::TempDir tmp("svg");
  write_svg(tmp / "a.svg", sample());
  std::ifstream in(tmp / "a.svg", std::ios::binary);
  const std::string disk{std::istreambuf_iterator<char>(in), {}};
  CHECK(disk == render_svg(sample()));
}

TEST_CASE("degenerate inputs still render") {
  Plot p;
  p.series.push_back({"one", {1}, {1}, {}, SeriesStyle::markers});
  CHECK_NOTHROW(render_svg(p));
  CHECK_NOTHROW(render_svg(Plot{}));
}

}
