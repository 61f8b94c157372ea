#include "sketchlab/expkit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sketchlab/core/error.hpp"

namespace sketchlab::expkit {

namespace {

constexpr int kWidth = 640, kHeight = 440;
constexpr int kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = 0.0, hi = 1.0;
  double map(double v, double a, double b) const {
    if (hi == lo) return (a + b) / 2;
    return a + (v - lo) / (hi - lo) * (b - a);
  }
};

Range nice_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0, 1};
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
     << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  return os.str();
}

void axes(std::ostringstream& os, const Range& rx, const Range& ry,
          const std::string& xlabel, const std::string& ylabel) {
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
     << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
     << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double tx = rx.lo + (rx.hi - rx.lo) * i / 5.0;
    const double px = rx.map(tx, kLeft, kWidth - kRight);
    os << "<line x1=\"" << px << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << px
       << "\" y2=\"" << kHeight - kBottom + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << kHeight - kBottom + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << (std::abs(tx) < 1e-9 ? 0.0 : (std::round(tx * 1000) / 1000)) << "</text>\n";
    const double ty = ry.lo + (ry.hi - ry.lo) * i / 5.0;
    const double py = ry.map(ty, kHeight - kBottom, kTop);
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py << "\" x2=\"" << kLeft
       << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << (std::round(ty * 1000) / 1000) << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">"
     << ylabel << "</text>\n";
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series,
                     std::optional<double> hline) {
  if (series.empty()) fail(ErrorCode::EmptyRecords, "no series for " + path);
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) {
      xlo = std::min(xlo, v);
      xhi = std::max(xhi, v);
    }
    for (double v : s.y) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (hline) {
    ylo = std::min(ylo, *hline);
    yhi = std::max(yhi, *hline);
  }
  const Range rx = nice_range(xlo, xhi), ry = nice_range(ylo, yhi);

  std::ostringstream os;
  os << header(title);
  axes(os, rx, ry, xlabel, ylabel);
  if (hline) {
    const double py = ry.map(*hline, kHeight - kBottom, kTop);
    os << "<line x1=\"" << kLeft << "\" y1=\"" << py << "\" x2=\"" << kWidth - kRight
       << "\" y2=\"" << py << "\" stroke=\"#888\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 8];
    std::ostringstream pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double px = rx.map(s.x[i], kLeft, kWidth - kRight);
      const double py = ry.map(s.y[i], kHeight - kBottom, kTop);
      pts << (i ? " " : "") << px << "," << py;
      os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    }
    if (s.x.size() > 1)
      os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
         << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 6 << "\" y=\"" << kTop + 16 * (si + 1)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
       << color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << os.str();
}

void write_bar_plot(const std::string& path, const std::string& title,
                    const std::vector<std::string>& series_labels,
                    const std::vector<BarGroup>& groups) {
  if (groups.empty()) fail(ErrorCode::EmptyRecords, "no bars for " + path);
  double hi = 0.0;
  for (const auto& g : groups)
    for (double v : g.values) hi = std::max(hi, v);
  const Range ry = nice_range(0.0, hi);

  std::ostringstream os;
  os << header(title);
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
     << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"black\"/>\n";
  const double span = (double)(kWidth - kLeft - kRight) / groups.size();
  const size_t nseries = series_labels.size();
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double gx = kLeft + span * gi;
    const double bw = span * 0.8 / std::max<size_t>(1, nseries);
    for (size_t si = 0; si < g.values.size(); ++si) {
      const double v = g.values[si];
      const double py = ry.map(v, kHeight - kBottom, kTop);
      os << "<rect x=\"" << gx + span * 0.1 + bw * si << "\" y=\"" << py
         << "\" width=\"" << bw * 0.95 << "\" height=\""
         << (kHeight - kBottom) - py << "\" fill=\"" << kPalette[si % 8]
         << "\"/>\n";
      os << "<text x=\"" << gx + span * 0.1 + bw * si + bw / 2 << "\" y=\""
         << py - 4 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         << "font-size=\"10\">" << (std::round(v * 100) / 100) << "</text>\n";
    }
    os << "<text x=\"" << gx + span / 2 << "\" y=\"" << kHeight - kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << g.label << "</text>\n";
  }
  for (size_t si = 0; si < nseries; ++si)
    os << "<text x=\"" << kWidth - kRight - 6 << "\" y=\"" << kTop + 16 * (si + 1)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
       << kPalette[si % 8] << "\">" << series_labels[si] << "</text>\n";
  os << "</svg>\n";

  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << os.str();
}

}  // namespace sketchlab::expkit
