#include "psc/lab.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "psc/error.hpp"

namespace psc {

namespace {

struct LineFit {
  double slope = 0, intercept = 0, rms = 0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1;
    A(i, 1) = x[i];
    b[i] = y[i];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  LineFit f;
  f.intercept = c[0];
  f.slope = c[1];
  f.rms = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(n));
  return f;
}

RateFit fit(const std::vector<double>& t, const std::vector<double>& y, std::optional<Window> window,
            bool polynomial) {
  if (t.size() != y.size()) throw DomainError("series length mismatch");
  const Window w = window ? *window : Window{t.empty() ? 0 : t.front(), t.empty() ? 0 : t.back()};
  if (!(w.t_end >= w.t_start)) throw DomainError("empty fitting window");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < w.t_start || t[i] > w.t_end) continue;
    if (!(y[i] > 0) || !std::isfinite(y[i])) throw DomainError("series must be positive");
    if (polynomial && !(t[i] > -1)) throw DomainError("polynomial fit needs t > -1");
    xs.push_back(polynomial ? std::log1p(t[i]) : t[i]);
    ys.push_back(std::log(y[i]));
  }
  if (xs.size() < 10) throw DomainError("insufficient samples");
  const LineFit lf = least_squares(xs, ys);
  // A drop in log y across the window at roundoff level is not decay.
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (!(-lf.slope * (*hi - *lo) > 1e-12)) throw DomainError("no decay detected");
  RateFit r;
  r.model = polynomial ? "polynomial" : "exponential";
  r.rate = -lf.slope;
  r.amplitude = std::exp(lf.intercept);
  r.log_residual = lf.rms;
  r.window = w;
  r.points = static_cast<int>(xs.size());
  return r;
}

}  // namespace

RateFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, std::optional<Window> window) {
  return fit(t, y, window, false);
}

RateFit fit_polynomial(const std::vector<double>& t, const std::vector<double>& y, std::optional<Window> window) {
  return fit(t, y, window, true);
}

const RateFit& RateClassification::best() const {
  if (exponential && polynomial)
    return exponential->log_residual <= polynomial->log_residual ? *exponential : *polynomial;
  if (exponential) return *exponential;
  return *polynomial;
}

Window default_window(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n == 0 || y.size() != n) throw DomainError("insufficient samples");
  const std::size_t keep = std::min(n, std::max<std::size_t>(n - n / 2, 10));
  const std::size_t first = n - keep;
  Window w{t[first], t.back()};

  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < n; ++i)
    if (y[i] > 0) floor = std::min(floor, y[i]);
  std::size_t last = n;
  while (last > first && !(y[last - 1] > 10 * floor)) --last;
  if (last > first && last - first >= 10) w.t_end = t[last - 1];
  return w;
}

RateClassification classify_rate(const std::vector<double>& t, const std::vector<double>& y,
                                 std::optional<Window> window) {
  RateClassification c;
  c.window = window ? *window : default_window(t, y);
  std::string exp_error, poly_error;
  try {
    c.exponential = fit_exponential(t, y, c.window);
  } catch (const DomainError& e) {
    exp_error = e.what();
  }
  try {
    c.polynomial = fit_polynomial(t, y, c.window);
  } catch (const DomainError& e) {
    poly_error = e.what();
  }
  if (!c.exponential && !c.polynomial) throw DomainError("rate classification failed: " + exp_error);
  if (c.exponential && c.polynomial) {
    const double a = c.exponential->log_residual, b = c.polynomial->log_residual;
    if (std::abs(a - b) <= 0.1 * std::max(a, b))
      c.model = "ambiguous";
    else
      c.model = a < b ? "exponential" : "polynomial";
  } else {
    c.model = c.exponential ? "exponential" : "polynomial";
  }
  return c;
}

LojasiewiczEstimate lojasiewicz_estimate(const std::vector<double>& energy, const std::vector<double>& grad_norm,
                                         double E_inf, std::optional<double> floor) {
  if (energy.size() != grad_norm.size()) throw DomainError("series length mismatch");
  for (std::size_t i = 1; i < energy.size(); ++i)
    if (energy[i] > energy[i - 1] + 1e-9 * (1 + std::abs(energy[i - 1])))
      throw DomainError("energy not monotone: check flow run");
  const double cut =
      floor ? *floor : 100 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(E_inf));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    const double gap = std::abs(energy[i] - E_inf);
    if (!(gap > cut) || !(grad_norm[i] > 0)) continue;
    xs.push_back(std::log(gap));
    ys.push_back(std::log(grad_norm[i]));
  }
  if (xs.size() < 3) throw DomainError("insufficient samples");
  const LineFit lf = least_squares(xs, ys);
  LojasiewiczEstimate est;
  est.slope = lf.slope;
  est.theta = 1 - lf.slope;
  est.residual = lf.rms;
  est.points = static_cast<int>(xs.size());
  return est;
}

}  // namespace psc
