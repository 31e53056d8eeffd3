#pragma once

// Deterministic text outputs: CSV tables, static SVG plots, FNV-1a hashes.
// Doubles are printed with %.17g so reruns are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hitchin/error.hpp"

namespace hitchin::io {

inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) fail(ErrorKind::InvalidInput, "csv row width mismatch");
    line(cells);
  }
  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double x : cells) s.push_back(num(x));
    row(s);
  }
  const std::string& str() const { return text_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\n") != std::string::npos) {
        text_ += '"';
        for (char ch : c) {
          if (ch == '"') text_ += '"';
          text_ += ch;
        }
        text_ += '"';
      } else {
        text_ += c;
      }
    }
    text_ += '\n';
  }
  size_t cols_;
  std::string text_;
};

inline void writeFile(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path);
  f << content;
  if (!f) fail(ErrorKind::InvalidInput, "write failed for " + path);
}

inline std::string readFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// --- SVG -------------------------------------------------------------------

namespace detail {

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 480, M = 56;
  double px(double x) const { return M + (x - x0) / (x1 - x0) * (W - 2 * M); }
  double py(double y) const { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); }
};

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline Frame frameFor(const std::vector<std::pair<double, double>>& pts, bool square) {
  Frame f{0, 1, 0, 1};
  if (pts.empty()) return f;
  f.x0 = f.x1 = pts[0].first;
  f.y0 = f.y1 = pts[0].second;
  for (auto [x, y] : pts) {
    f.x0 = std::min(f.x0, x);
    f.x1 = std::max(f.x1, x);
    f.y0 = std::min(f.y0, y);
    f.y1 = std::max(f.y1, y);
  }
  if (square) {
    double cx = (f.x0 + f.x1) / 2, cy = (f.y0 + f.y1) / 2;
    double r = std::max(f.x1 - f.x0, f.y1 - f.y0) / 2;
    f.x0 = cx - r;
    f.x1 = cx + r;
    f.y0 = cy - r;
    f.y1 = cy + r;
  }
  if (f.x1 - f.x0 < 1e-12) f.x0 -= 0.5, f.x1 += 0.5;
  if (f.y1 - f.y0 < 1e-12) f.y0 -= 0.5, f.y1 += 0.5;
  return f;
}

inline std::string open(const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  s << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  s << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  s << "<rect x=\"" << Frame::M << "\" y=\"" << Frame::M << "\" width=\"" << Frame::W - 2 * Frame::M
    << "\" height=\"" << Frame::H - 2 * Frame::M << "\" fill=\"none\" stroke=\"#444\"/>\n";
  auto label = [&](double x, double y, const std::string& t, const char* anchor) {
    s << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(t) << "</text>\n";
  };
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", f.x0);
  label(Frame::M, Frame::H - Frame::M + 16, b, "start");
  std::snprintf(b, sizeof b, "%.4g", f.x1);
  label(Frame::W - Frame::M, Frame::H - Frame::M + 16, b, "end");
  std::snprintf(b, sizeof b, "%.4g", f.y0);
  label(Frame::M - 4, Frame::H - Frame::M, b, "end");
  std::snprintf(b, sizeof b, "%.4g", f.y1);
  label(Frame::M - 4, Frame::M + 10, b, "end");
  label(Frame::W / 2, Frame::H - 12, xl, "middle");
  label(14, Frame::H / 2, yl, "start");
  return s.str();
}

}  // namespace detail

inline std::string svgScatter(const std::vector<std::pair<double, double>>& pts, const std::string& title,
                              const std::string& xlabel = "x", const std::string& ylabel = "y") {
  detail::Frame f = detail::frameFor(pts, true);
  std::string s = detail::open(f, title, xlabel, ylabel);
  for (auto [x, y] : pts)
    s += "<circle cx=\"" + detail::fmt(f.px(x)) + "\" cy=\"" + detail::fmt(f.py(y)) + "\" r=\"0.8\" fill=\"#1f4e9c\"/>\n";
  s += "</svg>\n";
  return s;
}

// Data as a polyline plus the line y = slope x + intercept over [fitLo, fitHi].
inline std::string svgLineFit(const std::vector<std::pair<double, double>>& pts, double slope, double intercept,
                              double fitLo, double fitHi, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  std::vector<std::pair<double, double>> all = pts;
  all.push_back({fitLo, slope * fitLo + intercept});
  all.push_back({fitHi, slope * fitHi + intercept});
  detail::Frame f = detail::frameFor(all, false);
  std::string s = detail::open(f, title, xlabel, ylabel);
  s += "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += detail::fmt(f.px(pts[i].first)) + "," + detail::fmt(f.py(pts[i].second));
  }
  s += "\"/>\n";
  s += "<line x1=\"" + detail::fmt(f.px(fitLo)) + "\" y1=\"" + detail::fmt(f.py(slope * fitLo + intercept)) +
       "\" x2=\"" + detail::fmt(f.px(fitHi)) + "\" y2=\"" + detail::fmt(f.py(slope * fitHi + intercept)) +
       "\" stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
  char b[64];
  std::snprintf(b, sizeof b, "slope %.4f", slope);
  s += "<text x=\"" + detail::fmt(detail::Frame::M + 8) + "\" y=\"" + detail::fmt(detail::Frame::M + 18) +
       "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#c0392b\">" + b + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace hitchin::io
