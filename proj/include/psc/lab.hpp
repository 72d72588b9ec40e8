#pragma once

// Convergence-rate fits on positive time series and the empirical
// Lojasiewicz exponent from (energy gap, gradient norm) pairs.

#include <optional>
#include <string>
#include <vector>

namespace psc {

struct Window {
  double t_start = 0;
  double t_end = 0;
};

struct RateFit {
  std::string model;  // "exponential" or "polynomial"
  double rate = 0;
  double amplitude = 0;
  double log_residual = 0;  // RMS residual in the fitted log domain
  Window window;
  int points = 0;
};

/// log y = log A - rate t.
RateFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y,
                        std::optional<Window> window = std::nullopt);
/// log y = log A - rate log(1 + t).
RateFit fit_polynomial(const std::vector<double>& t, const std::vector<double>& y,
                       std::optional<Window> window = std::nullopt);

struct RateClassification {
  std::string model;  // "exponential", "polynomial" or "ambiguous"
  std::optional<RateFit> exponential, polynomial;
  Window window;

  bool ambiguous() const { return model == "ambiguous"; }
  /// The fit with the smaller residual (also reported when ambiguous).
  const RateFit& best() const;
};

/// Default fitting window: the trailing half of the samples (at least ten),
/// minus the final decade above the series minimum when enough points remain.
Window default_window(const std::vector<double>& t, const std::vector<double>& y);

RateClassification classify_rate(const std::vector<double>& t, const std::vector<double>& y,
                                 std::optional<Window> window = std::nullopt);

struct LojasiewiczEstimate {
  double theta = 0;
  double slope = 0;     // d log |DE| / d log |E - E_inf|
  double residual = 0;  // RMS residual of the log-log fit
  int points = 0;
};

/// Fits log |DE| against log |E - E_inf|; theta = 1 - slope. Pairs with
/// |E - E_inf| <= floor are dropped; the default floor is
/// 100 eps max(1, |E_inf|).
LojasiewiczEstimate lojasiewicz_estimate(const std::vector<double>& energy, const std::vector<double>& grad_norm,
                                         double E_inf, std::optional<double> floor = std::nullopt);

}  // namespace psc
