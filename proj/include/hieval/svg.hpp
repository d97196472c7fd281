#pragma once

// Static SVG plots built from plain primitives. Output depends only on the
// inputs, so files can be compared byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hieval::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

class Canvas {
 public:
  Canvas(double width, double height, std::string generator) : w_(width), h_(height), generator_(std::move(generator)) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& cls = "") {
    body_ << "<line" << klass(cls) << " x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill, const std::string& cls = "") {
    body_ << "<circle" << klass(cls) << " cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& cls = "") {
    body_ << "<rect" << klass(cls) << " x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "start", double size = 11) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 0.8) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << ' ';
      body_ << num(pts[i].first) << ',' << num(pts[i].second);
    }
    body_ << "\"/>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\"" << num(h_)
        << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n";
    out << "<!-- generator: " << escape(generator_) << " -->\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << num(w_) << "\" height=\"" << num(h_) << "\" fill=\"white\"/>\n";
    out << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  static std::string klass(const std::string& cls) { return cls.empty() ? "" : " class=\"" + cls + "\""; }

  double w_, h_;
  std::string generator_;
  std::ostringstream body_;
};

/// Linear map from a data range onto a pixel range, padded by 5%.
struct Scale {
  double lo, hi, px0, px1;

  static Scale fit(double lo, double hi, double px0, double px1) {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, px0, px1};
  }

  double operator()(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

inline std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12; t += step) out.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return out;
}

inline void x_axis(Canvas& c, const Scale& sx, double y, double top) {
  c.line(sx.px0, y, sx.px1, y, "#333");
  for (double t : ticks(sx.lo, sx.hi)) {
    const double x = sx(t);
    c.line(x, y, x, y + 4, "#333");
    c.line(x, top, x, y, "#eee", 0.5);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    c.text(x, y + 16, buf, "middle", 10);
  }
}

// ---------------------------------------------------------------------------

struct ForestRow {
  std::string label;
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
  std::optional<double> baseline_mean;  // empirical mean
  std::optional<double> baseline_sem;
};

/// Posterior intervals (line + dot) with optional empirical mean ± SEM
/// markers drawn as hollow squares beneath each row.
inline std::string forest_plot(const std::vector<ForestRow>& rows, const std::string& title, const std::string& axis,
                               const std::string& generator, std::optional<double> reference = std::nullopt) {
  const double row_h = 26, left = 200, right = 40, top = 40, plot_w = 460;
  const double height = top + row_h * static_cast<double>(std::max<std::size_t>(rows.size(), 1)) + 50;
  Canvas c(left + plot_w + right, height, generator);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : rows) {
    lo = std::min({lo, r.low, r.mean});
    hi = std::max({hi, r.high, r.mean});
    if (r.baseline_mean) {
      const double s = r.baseline_sem.value_or(0.0);
      lo = std::min(lo, *r.baseline_mean - s);
      hi = std::max(hi, *r.baseline_mean + s);
    }
  }
  if (reference) {
    lo = std::min(lo, *reference);
    hi = std::max(hi, *reference);
  }
  if (rows.empty()) lo = 0.0, hi = 1.0;
  const Scale sx = Scale::fit(lo, hi, left, left + plot_w);
  const double axis_y = top + row_h * static_cast<double>(rows.size()) + 6;
  c.text(left + plot_w / 2, 20, title, "middle", 13);
  x_axis(c, sx, axis_y, top - 6);
  if (reference) c.line(sx(*reference), top - 6, sx(*reference), axis_y, "#999", 1.0, "reference");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ForestRow& r = rows[i];
    const double y = top + row_h * (static_cast<double>(i) + 0.5);
    c.text(left - 8, y + 4, r.label, "end", 11);
    c.line(sx(r.low), y - 3, sx(r.high), y - 3, "#1f4e9c", 2.5, "posterior-interval");
    c.circle(sx(r.mean), y - 3, 3.5, "#1f4e9c", "posterior-mean");
    if (r.baseline_mean) {
      const double by = y + 6;
      if (r.baseline_sem) {
        c.line(sx(*r.baseline_mean - *r.baseline_sem), by, sx(*r.baseline_mean + *r.baseline_sem), by, "#c0392b",
               1.5, "baseline-sem");
      }
      c.rect(sx(*r.baseline_mean) - 3, by - 3, 6, 6, "#c0392b", "baseline-mean");
    }
  }
  c.text(left + plot_w / 2, axis_y + 34, axis, "middle", 11);
  return c.str();
}

// ---------------------------------------------------------------------------

struct TracePanel {
  std::string label;
  std::vector<std::vector<double>> chains;
};

inline std::string trace_plot(const std::vector<TracePanel>& panels, const std::string& generator) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
                                 "#7f7f7f"};
  const double panel_h = 120, left = 60, width = 640, gap = 30, top = 20;
  const double height = top + static_cast<double>(panels.size()) * (panel_h + gap) + 10;
  Canvas c(left + width + 20, height, generator);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const TracePanel& panel = panels[p];
    const double y0 = top + static_cast<double>(p) * (panel_h + gap);
    double lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    for (const auto& ch : panel.chains) {
      for (double v : ch) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      n = std::max(n, ch.size());
    }
    if (n == 0) continue;
    const Scale sy = Scale::fit(lo, hi, y0 + panel_h, y0 + 14);
    const double dx = n > 1 ? width / static_cast<double>(n - 1) : 0.0;
    c.text(left, y0 + 10, panel.label, "start", 11);
    c.line(left, y0 + panel_h, left + width, y0 + panel_h, "#333");
    c.line(left, y0 + 14, left, y0 + panel_h, "#333");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", hi);
    c.text(left - 4, sy(hi) + 4, buf, "end", 9);
    std::snprintf(buf, sizeof buf, "%.3g", lo);
    c.text(left - 4, sy(lo) + 4, buf, "end", 9);
    // At most ~1000 vertices per chain keeps files small; thinning is uniform.
    const std::size_t stride = std::max<std::size_t>(1, n / 1000);
    for (std::size_t k = 0; k < panel.chains.size(); ++k) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t s = 0; s < panel.chains[k].size(); s += stride) {
        pts.emplace_back(left + dx * static_cast<double>(s), sy(panel.chains[k][s]));
      }
      c.polyline(pts, colors[k % 8]);
    }
  }
  return c.str();
}

// ---------------------------------------------------------------------------

struct WaicBar {
  std::string model;
  double elpd = 0.0;
  double se = 0.0;
  std::optional<double> delta;  // vs best
  std::optional<double> delta_se;
};

/// elpd ± se per model (best first), with the difference to the best model
/// drawn as a grey interval.
inline std::string waic_plot(const std::vector<WaicBar>& bars, const std::string& generator) {
  const double row_h = 34, left = 200, right = 40, top = 40, plot_w = 460;
  Canvas c(left + plot_w + right, top + row_h * static_cast<double>(bars.size()) + 50, generator);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& b : bars) {
    lo = std::min(lo, b.elpd - b.se);
    hi = std::max(hi, b.elpd + b.se);
    if (b.delta && !bars.empty()) {
      const double best = bars.front().elpd;
      const double ds = b.delta_se.value_or(0.0);
      lo = std::min(lo, best + *b.delta - ds);
      hi = std::max(hi, best + *b.delta + ds);
    }
  }
  const Scale sx = Scale::fit(lo, hi, left, left + plot_w);
  const double axis_y = top + row_h * static_cast<double>(bars.size()) + 6;
  c.text(left + plot_w / 2, 20, "WAIC comparison (elpd, higher is better)", "middle", 13);
  x_axis(c, sx, axis_y, top - 6);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const WaicBar& b = bars[i];
    const double y = top + row_h * (static_cast<double>(i) + 0.5);
    c.text(left - 8, y + 4, b.model, "end", 11);
    c.line(sx(b.elpd - b.se), y - 4, sx(b.elpd + b.se), y - 4, "#222", 2.0, "elpd-se");
    c.circle(sx(b.elpd), y - 4, 4, "#222", "elpd");
    if (b.delta && b.delta_se) {
      const double best = bars.front().elpd;
      c.line(sx(best + *b.delta - *b.delta_se), y + 6, sx(best + *b.delta + *b.delta_se), y + 6, "#999", 1.5,
             "delta-se");
      c.rect(sx(best + *b.delta) - 3, y + 3, 6, 6, "#999", "delta");
    }
  }
  c.text(left + plot_w / 2, axis_y + 34, "elpd_waic", "middle", 11);
  return c.str();
}

}  // namespace hieval::svg
