#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "psc/geometry.hpp"

namespace psc {

namespace {

struct Samples {
  std::vector<double> r, w, wp, wpp;
};

Samples read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metric samples '" + path + "'");
  Samples s;
  std::string line;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    if (header) {
      std::string a, b, c, d;
      row >> a >> b >> c >> d;
      if (a != "r" || b != "w" || c != "wp" || d != "wpp")
        throw ConfigError("metric samples need header r,w,wp,wpp");
      header = false;
      continue;
    }
    double r, w, wp, wpp;
    if (!(row >> r >> w >> wp >> wpp))
      throw ConfigError("malformed metric sample on line " + std::to_string(lineno));
    if (!s.r.empty() && r <= s.r.back()) throw ConfigError("metric sample radii must increase");
    s.r.push_back(r);
    s.w.push_back(w);
    s.wp.push_back(wp);
    s.wpp.push_back(wpp);
  }
  if (s.r.size() < 2) throw ConfigError("metric samples need at least two rows");
  return s;
}

double hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
  const double dx = x1 - x0;
  const double t = (x - x0) / dx;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * dx * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * dx * d1;
}

}  // namespace

WarpedMetric load_custom_metric(const RadialGrid& grid, const std::string& path, const FSpec& fspec) {
  const Samples s = read_csv(path);
  const int n = grid.size();
  Field w(n), wp(n), wpp(n);
  for (int j = 0; j < n; ++j) {
    const double r = grid.nodes[j];
    if (r < s.r.front() || r > s.r.back()) throw ConfigError("metric samples do not cover the grid");
    auto it = std::upper_bound(s.r.begin(), s.r.end(), r);
    std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - s.r.begin(), 1), s.r.size() - 1);
    const std::size_t i = k - 1;
    w[j] = hermite(s.r[i], s.r[k], s.w[i], s.w[k], s.wp[i], s.wp[k], r);
    wp[j] = hermite(s.r[i], s.r[k], s.wp[i], s.wp[k], s.wpp[i], s.wpp[k], r);
    const double t = (r - s.r[i]) / (s.r[k] - s.r[i]);
    wpp[j] = (1 - t) * s.wpp[i] + t * s.wpp[k];
  }
  return custom_metric(grid, w, wp, wpp, fspec, path);
}

WarpedMetric build_metric(const RadialGrid& grid, const MetricFamily& family, const FSpec& fspec) {
  if (family.kind == MetricFamily::Kind::custom) return load_custom_metric(grid, family.source, fspec);
  return sample_metric(grid, family, fspec);
}

}  // namespace psc
