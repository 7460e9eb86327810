#include "sewerml/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>

namespace sewerml::plot {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(const std::string& s) {
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

std::string rgb(double r, double g, double b) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(255 * std::clamp(r, 0.0, 1.0))),
                static_cast<int>(std::lround(255 * std::clamp(g, 0.0, 1.0))),
                static_cast<int>(std::lround(255 * std::clamp(b, 0.0, 1.0))));
  return buf;
}

// Perceptual ramp (dark blue to yellow) sampled at five anchors.
std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> kStops = {{
      {0.267, 0.005, 0.329}, {0.231, 0.322, 0.545}, {0.129, 0.569, 0.549}, {0.369, 0.788, 0.384}, {0.993, 0.906, 0.144}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
  const double f = t - static_cast<double>(i);
  const auto& a = kStops[i];
  const auto& b = kStops[i + 1];
  return rgb(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2]));
}

const std::array<const char*, 8> kPalette = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                             "#66a61e", "#e6ab02", "#a6761d", "#666666"};

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {
    body_ = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
            "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    rect(0, 0, width, height, "#ffffff");
  }

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
             "\" fill=\"" + fill + "\"" + extra + "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& extra = "") {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
             "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"" + extra + "/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(r) + "\" fill=\"" + fill + "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5) {
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\" points=\"";
    for (const auto& [x, y] : pts) body_ += num(x) + "," + num(y) + " ";
    body_ += "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill, const std::string& stroke) {
    body_ += "<polygon fill=\"" + fill + "\" stroke=\"" + stroke + "\" points=\"";
    for (const auto& [x, y] : pts) body_ += num(x) + "," + num(y) + " ";
    body_ += "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "start", double size = 11,
            const std::string& fill = "#000000") {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" + num(size) +
             "\" fill=\"" + fill + "\">" + escape(s) + "</text>\n";
  }
  void vertical_text(double x, double y, const std::string& s) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(x) +
             " " + num(y) + ")\">" + escape(s) + "</text>\n";
  }
  void title(const std::string& s) { text(width_ / 2, 18, s, "middle", 13); }

  std::string finish() { return body_ + "</svg>\n"; }

 private:
  double width_;
  double height_;
  std::string body_;
};

struct Axis {
  double lo, hi;    // data range
  double a, b;      // pixel range
  bool log = false;
  double operator()(double v) const {
    if (log) return a + (b - a) * (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
    return hi == lo ? 0.5 * (a + b) : a + (b - a) * (v - lo) / (hi - lo);
  }
};

std::vector<double> ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void frame(Svg& svg, const Axis& x, const Axis& y, const std::string& xlabel, const std::string& ylabel,
           const std::vector<double>& xticks, const std::vector<double>& yticks) {
  svg.line(x.a, y.a, x.b, y.a, "#333333");
  svg.line(x.a, y.a, x.a, y.b, "#333333");
  for (double t : xticks) {
    svg.line(x(t), y.a, x(t), y.a + 4, "#333333");
    svg.text(x(t), y.a + 16, tick_label(t), "middle");
  }
  for (double t : yticks) {
    svg.line(x.a - 4, y(t), x.a, y(t), "#333333");
    svg.text(x.a - 6, y(t) + 4, tick_label(t), "end");
  }
  svg.text(0.5 * (x.a + x.b), y.a + 34, xlabel, "middle");
  const double cy = 0.5 * (y.a + y.b);
  svg.vertical_text(16, cy, ylabel);
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> out;
  for (double decade = std::pow(10.0, std::floor(std::log10(lo))); decade <= hi; decade *= 10.0)
    for (double m : {1.0, 2.0, 5.0})
      if (m * decade >= lo && m * decade <= hi) out.push_back(m * decade);
  return out;
}

}  // namespace

std::string scalogram_svg(const wavelet::WaveletSpectrum& spectrum, const std::string& title) {
  const double W = 760, H = 420;
  Svg svg(W, H);
  svg.title(title);
  const auto& scales = spectrum.scales();
  const auto& times = spectrum.times();
  const Axis x{times.front(), times.back(), 70, W - 90};
  const Axis y{scales.front(), scales.back(), H - 50, 35, true};

  // downsample to at most 240 time columns x 100 scale rows
  const std::size_t nt = std::min<std::size_t>(240, times.size());
  const std::size_t ns = std::min<std::size_t>(100, scales.size());
  double vmax = 0.0;
  for (std::size_t s = 0; s < spectrum.scale_count(); ++s)
    for (std::size_t t = 0; t < spectrum.time_count(); ++t) vmax = std::max(vmax, std::abs(spectrum.at(s, t)));
  for (std::size_t si = 0; si < ns; ++si) {
    const std::size_t s0 = si * scales.size() / ns;
    const std::size_t s1 = std::max(s0 + 1, (si + 1) * scales.size() / ns);
    const double ytop = si + 1 < ns ? y(scales[s1]) : y.b;
    const double ybot = si == 0 ? y.a : y(scales[s0]);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const std::size_t t0 = ti * times.size() / nt;
      const std::size_t t1 = std::max(t0 + 1, (ti + 1) * times.size() / nt);
      double m = 0.0;
      bool valid = true;
      for (std::size_t s = s0; s < s1; ++s)
        for (std::size_t t = t0; t < t1; ++t) {
          m = std::max(m, std::abs(spectrum.at(s, t)));
          valid = valid && spectrum.valid(s, t);
        }
      const double xl = x(times[t0]);
      const double xr = ti + 1 < nt ? x(times[t1]) : x.b;
      svg.rect(xl, ytop, xr - xl + 0.3, ybot - ytop + 0.3, ramp(vmax > 0 ? m / vmax : 0.0),
               valid ? "" : " fill-opacity=\"0.45\"");
    }
  }
  frame(svg, x, y, "time (h)", "scale (h)", ticks(x.lo, x.hi), log_ticks(y.lo, y.hi));
  for (int i = 0; i < 20; ++i) svg.rect(W - 70, y.a - (y.a - y.b) * (i + 1) / 20.0, 14, (y.a - y.b) / 20.0 + 0.3, ramp((i + 0.5) / 20.0));
  svg.text(W - 50, y.b + 8, tick_label(vmax), "start", 9);
  svg.text(W - 50, y.a, "0", "start", 9);
  svg.text(W - 63, y.b - 6, "|W|", "middle", 10);
  return svg.finish();
}

std::string variance_svg(const wavelet::VarianceCurve& curve, const std::vector<wavelet::DominantPeriod>& peaks,
                         const std::string& title) {
  const double W = 640, H = 360;
  Svg svg(W, H);
  svg.title(title);
  const double vmax = *std::max_element(curve.variance.begin(), curve.variance.end());
  const Axis x{curve.scales.front(), curve.scales.back(), 80, W - 20, true};
  const Axis y{0.0, vmax > 0 ? vmax * 1.08 : 1.0, H - 50, 35};
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < curve.scales.size(); ++i) pts.emplace_back(x(curve.scales[i]), y(curve.variance[i]));
  svg.polyline(pts, "#1f4e79");
  int rank = 1;
  for (const auto& p : peaks) {
    if (!p.filled) {
      svg.circle(x(p.scale), y(p.variance), 4, "#c0392b");
      svg.text(x(p.scale), y(p.variance) - 8, "WAVE" + std::to_string(rank) + " " + tick_label(std::round(p.scale)), "middle", 10);
    }
    ++rank;
  }
  frame(svg, x, y, "scale (h)", "Var", log_ticks(x.lo, x.hi), ticks(y.lo, y.hi));
  return svg.finish();
}

std::string silhouette_svg(const std::vector<std::pair<int, double>>& scores, int best_k) {
  const double W = 520, H = 340;
  Svg svg(W, H);
  svg.title("mean silhouette coefficient against k");
  double lo = 0.0, hi = 1.0;
  for (const auto& [k, s] : scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const Axis x{static_cast<double>(scores.front().first), static_cast<double>(scores.back().first), 70, W - 30};
  const Axis y{lo, hi, H - 50, 35};
  std::vector<std::pair<double, double>> pts;
  for (const auto& [k, s] : scores) pts.emplace_back(x(k), y(s));
  svg.polyline(pts, "#1f4e79");
  for (const auto& [k, s] : scores) svg.circle(x(k), y(s), k == best_k ? 6 : 3.5, k == best_k ? "#c0392b" : "#1f4e79");
  std::vector<double> xt;
  for (const auto& [k, s] : scores) xt.push_back(k);
  frame(svg, x, y, "number of clusters k", "SC", xt, ticks(lo, hi));
  return svg.finish();
}

std::string dendrogram_svg(const cluster::Dendrogram& d, double cut_height) {
  const auto n = static_cast<int>(d.leaves());
  const double W = std::max(480.0, 40.0 * n + 100), H = 400;
  Svg svg(W, H);
  svg.title("Ward dendrogram");
  std::vector<int> order;
  std::function<void(int)> walk = [&](int node) {
    if (node < n) {
      order.push_back(node);
      return;
    }
    walk(d.merges[static_cast<std::size_t>(node - n)].a);
    walk(d.merges[static_cast<std::size_t>(node - n)].b);
  };
  walk(2 * n - 2);
  const double dmax = d.max_height() > 0 ? d.max_height() : 1.0;
  const Axis x{0.0, static_cast<double>(n - 1), 80, W - 30};
  const Axis y{0.0, dmax * 1.05, H - 70, 35};
  std::vector<double> xpos(static_cast<std::size_t>(2 * n - 1));
  std::vector<double> ypos(static_cast<std::size_t>(2 * n - 1), 0.0);
  for (int i = 0; i < n; ++i) xpos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = x(i);
  for (std::size_t m = 0; m < d.merges.size(); ++m) {
    const auto& mg = d.merges[m];
    const auto node = static_cast<std::size_t>(n) + m;
    const double xa = xpos[static_cast<std::size_t>(mg.a)], xb = xpos[static_cast<std::size_t>(mg.b)];
    const double ya = ypos[static_cast<std::size_t>(mg.a)], yb = ypos[static_cast<std::size_t>(mg.b)];
    xpos[node] = 0.5 * (xa + xb);
    ypos[node] = mg.height;
    svg.line(xa, y(ya), xa, y(mg.height), "#1f4e79", 1.5);
    svg.line(xb, y(yb), xb, y(mg.height), "#1f4e79", 1.5);
    svg.line(xa, y(mg.height), xb, y(mg.height), "#1f4e79", 1.5);
  }
  for (int i = 0; i < n; ++i) {
    const int leaf = order[static_cast<std::size_t>(i)];
    svg.text(x(i), y.a + 14, d.leaf_ids[static_cast<std::size_t>(leaf)], "middle", 9);
  }
  if (cut_height > 0) {
    svg.line(x.a - 10, y(cut_height), x.b + 10, y(cut_height), "#c0392b", 1.0, " stroke-dasharray=\"6,4\"");
    svg.text(x.b, y(cut_height) - 5, "cut " + num(cut_height), "end", 10, "#c0392b");
  }
  svg.line(x.a - 20, y.a, x.a - 20, y.b, "#333333");
  for (double t : ticks(0.0, dmax)) {
    svg.line(x.a - 24, y(t), x.a - 20, y(t), "#333333");
    svg.text(x.a - 26, y(t) + 4, tick_label(t), "end");
  }
  svg.text(x.a - 20, y.b - 8, "height", "middle");
  return svg.finish();
}

std::string som_map_svg(int rows, int cols, const std::vector<double>& values, const std::vector<std::string>& labels,
                        const std::string& title) {
  const double r = 28.0;                 // hexagon circumradius
  const double dx = std::sqrt(3.0) * r;  // centre spacing along a row
  const double W = dx * (cols + 0.5) + 60, H = 1.5 * r * (rows - 1) + 2 * r + 70;
  Svg svg(W, H);
  svg.title(title);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (int row = 0; row < rows; ++row)
    for (int col = 0; col < cols; ++col) {
      const auto idx = static_cast<std::size_t>(row * cols + col);
      const double cx = 30 + dx * (col + 0.5 + ((row & 1) ? 0.5 : 0.0));
      const double cy = 40 + r + 1.5 * r * row;
      std::vector<std::pair<double, double>> pts;
      for (int k = 0; k < 6; ++k) {
        const double ang = std::numbers::pi / 180.0 * (60.0 * k - 30.0);
        pts.emplace_back(cx + r * std::cos(ang), cy + r * std::sin(ang));
      }
      const double t = hi > lo ? (values[idx] - lo) / (hi - lo) : 0.0;
      svg.polygon(pts, ramp(t), "#ffffff");
      if (idx < labels.size() && !labels[idx].empty()) svg.text(cx, cy + 4, labels[idx], "middle", 11, t > 0.6 ? "#000000" : "#ffffff");
    }
  return svg.finish();
}

std::string biplot_svg(const pca::PcaResult& result, int pc_x, int pc_y, const std::vector<int>& cluster_of_row,
                       const std::vector<std::string>& cluster_names) {
  const double W = 600, H = 560;
  Svg svg(W, H);
  svg.title("PC" + std::to_string(pc_x + 1) + " vs PC" + std::to_string(pc_y + 1) + " (" +
            num(100 * result.explained[static_cast<std::size_t>(pc_x)]) + "% / " +
            num(100 * result.explained[static_cast<std::size_t>(pc_y)]) + "%)");
  double smax = 1e-12;
  for (Eigen::Index i = 0; i < result.scores.rows(); ++i)
    smax = std::max({smax, std::abs(result.scores(i, pc_x)), std::abs(result.scores(i, pc_y))});
  double lmax = 1e-12;
  for (Eigen::Index j = 0; j < result.loadings.rows(); ++j)
    lmax = std::max({lmax, std::abs(result.loadings(j, pc_x)), std::abs(result.loadings(j, pc_y))});
  const double lim = smax * 1.15;
  const Axis x{-lim, lim, 70, W - 30};
  const Axis y{-lim, lim, H - 50, 35};
  svg.line(x(0), y.a, x(0), y.b, "#cccccc");
  svg.line(x.a, y(0), x.b, y(0), "#cccccc");
  const double arrow = smax / lmax;
  for (Eigen::Index j = 0; j < result.loadings.rows(); ++j) {
    const double lx = result.loadings(j, pc_x) * arrow, ly = result.loadings(j, pc_y) * arrow;
    svg.line(x(0), y(0), x(lx), y(ly), "#c0392b", 1.0);
    svg.text(x(lx * 1.06), y(ly * 1.06) + 4, result.attributes[static_cast<std::size_t>(j)], "middle", 9, "#c0392b");
  }
  for (Eigen::Index i = 0; i < result.scores.rows(); ++i) {
    const int c = i < static_cast<Eigen::Index>(cluster_of_row.size()) ? cluster_of_row[static_cast<std::size_t>(i)] : 0;
    const double px = x(result.scores(i, pc_x)), py = y(result.scores(i, pc_y));
    svg.circle(px, py, 5, kPalette[static_cast<std::size_t>(c) % kPalette.size()]);
    svg.text(px + 7, py - 5, result.row_ids[static_cast<std::size_t>(i)], "start", 8);
  }
  for (std::size_t c = 0; c < cluster_names.size(); ++c) {
    svg.circle(W - 90, 45 + 16 * static_cast<double>(c), 5, kPalette[c % kPalette.size()]);
    svg.text(W - 80, 49 + 16 * static_cast<double>(c), "cluster " + cluster_names[c]);
  }
  frame(svg, x, y, "PC" + std::to_string(pc_x + 1), "PC" + std::to_string(pc_y + 1), ticks(-lim, lim), ticks(-lim, lim));
  return svg.finish();
}

std::string score_bars_svg(const pca::ClusterScores& scores, const std::vector<std::string>& cluster_names) {
  const auto k = static_cast<int>(scores.means.rows());
  const auto p = static_cast<int>(scores.means.cols());
  const double W = std::max(420.0, 120.0 * k + 100), H = 360;
  Svg svg(W, H);
  svg.title("mean principal component scores per cluster");
  double lim = 1e-12;
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < p; ++j) lim = std::max(lim, std::abs(scores.means(c, j)));
  lim *= 1.1;
  const Axis x{0.0, static_cast<double>(k), 70, W - 20};
  const Axis y{-lim, lim, H - 50, 35};
  const double group = (x.b - x.a) / k;
  const double bar = group * 0.8 / p;
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < p; ++j) {
      const double v = scores.means(c, j);
      const double left = x.a + group * c + group * 0.1 + bar * j;
      svg.rect(left, std::min(y(v), y(0)), bar - 1, std::abs(y(v) - y(0)), kPalette[static_cast<std::size_t>(j) % kPalette.size()]);
    }
    svg.text(x.a + group * (c + 0.5), y.a + 16, "cluster " + cluster_names[static_cast<std::size_t>(c)], "middle");
  }
  for (int j = 0; j < p; ++j) {
    svg.rect(W - 80, 40 + 16 * j, 10, 10, kPalette[static_cast<std::size_t>(j) % kPalette.size()]);
    svg.text(W - 65, 49 + 16 * j, "PC" + std::to_string(j + 1));
  }
  svg.line(x.a, y(0), x.b, y(0), "#333333");
  svg.line(x.a, y.a, x.a, y.b, "#333333");
  for (double t : ticks(-lim, lim)) svg.text(x.a - 6, y(t) + 4, tick_label(t), "end");
  return svg.finish();
}

}  // namespace sewerml::plot
