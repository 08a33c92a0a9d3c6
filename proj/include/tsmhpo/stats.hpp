#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsmhpo {

// =========================================================================
// Samples
// =========================================================================

/// A labelled set of repeated measurements (e.g. the 30 full-budget fitness
/// values of one hyperparameter setting). At least two finite values.
struct RunSample {
  std::string label;
  std::vector<double> values;

  void validate() const {
    if (values.size() < 2)
      throw std::invalid_argument("sample '" + label +
                                  "' needs at least two values");
    for (double v : values)
      if (!std::isfinite(v))
        throw std::invalid_argument("sample '" + label +
                                    "' contains a non-finite value");
  }
};

/// Arithmetic mean and sample standard deviation (n - 1 denominator).
inline std::pair<double, double> summarize(const RunSample& sample) {
  sample.validate();
  const std::size_t n = sample.values.size();
  double mean = 0.0;
  for (double v : sample.values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample.values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

// =========================================================================
// Regularized incomplete beta
// =========================================================================

namespace detail {

// Continued-fraction expansion of I_x(a, b), modified Lentz iteration.
// Converges quickly for x < (a + 1) / (a + b + 2); the symmetry
// I_x(a, b) = 1 - I_{1-x}(b, a) covers the other half.
inline double incomplete_beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  constexpr int max_iterations = 400;

  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;

  for (int m = 1; m <= max_iterations; ++m) {
    const double dm = static_cast<double>(m);
    // Even step.
    double numerator = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    // Odd step.
    numerator = -(a + dm) * (a + b + dm) * x /
                ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + numerator * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numerator / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    result *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  return result;
}

}  // namespace detail

/// I_x(a, b), evaluated by continued fraction to ~1e-15 relative accuracy.
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("incomplete beta needs positive parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::incomplete_beta_cf(a, b, x) / a;
  return 1.0 - front * detail::incomplete_beta_cf(b, a, 1.0 - x) / b;
}

/// Two-tailed Student-t tail probability P(|T_df| >= |t|).
inline double student_t_two_tailed_p(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("degrees of freedom must be positive");
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

// =========================================================================
// Two-sample t-test
// =========================================================================

enum class TTestVariant { welch, pooled };

/// Outcome of one two-sample test. Sign convention: the first sample is the
/// baseline, and fitness is minimised, so t < 0 with h = 1 means the
/// baseline is significantly better and t > 0 with h = 1 means the
/// challenger is. `zero_variance` flags the degenerate constant-sample case
/// where t is defined by convention rather than computed.
struct TestOutcome {
  double t = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  int h = 0;
  double alpha = 0.1;
  bool zero_variance = false;
  TTestVariant variant = TTestVariant::welch;
};

/// Two-sample t-test of baseline `a` against challenger `b`, two-tailed.
/// Welch's unequal-variance form by default; the pooled-variance Student
/// form is available for sensitivity checks. h = 1 iff p < alpha.
inline TestOutcome t_test(const RunSample& a, const RunSample& b, double alpha,
                          TTestVariant variant = TTestVariant::welch) {
  a.validate();
  b.validate();
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0, 1)");

  const auto [mean_a, sd_a] = summarize(a);
  const auto [mean_b, sd_b] = summarize(b);
  const double na = static_cast<double>(a.values.size());
  const double nb = static_cast<double>(b.values.size());
  const double var_a = sd_a * sd_a;
  const double var_b = sd_b * sd_b;

  TestOutcome outcome;
  outcome.alpha = alpha;
  outcome.variant = variant;

  double se = 0.0;
  if (variant == TTestVariant::welch) {
    const double qa = var_a / na;
    const double qb = var_b / nb;
    se = std::sqrt(qa + qb);
    outcome.degrees_of_freedom =
        se > 0.0 ? (qa + qb) * (qa + qb) /
                       (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
                 : na + nb - 2.0;
  } else {
    const double pooled =
        ((na - 1.0) * var_a + (nb - 1.0) * var_b) / (na + nb - 2.0);
    se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    outcome.degrees_of_freedom = na + nb - 2.0;
  }

  if (se == 0.0) {
    // Both samples constant. Equal means: no evidence either way, t = 0 by
    // convention. Distinct means: the difference is exact, so reject.
    outcome.zero_variance = true;
    if (mean_a == mean_b) {
      outcome.t = 0.0;
      outcome.p_value = 1.0;
      outcome.h = 0;
    } else {
      outcome.t = std::copysign(std::numeric_limits<double>::max(),
                                mean_a - mean_b);
      outcome.p_value = 0.0;
      outcome.h = 1;
    }
    return outcome;
  }

  // mean_a - mean_b: a smaller (better) baseline mean drives t negative,
  // matching the reporting convention above.
  outcome.t = (mean_a - mean_b) / se;
  outcome.p_value = student_t_two_tailed_p(outcome.t, outcome.degrees_of_freedom);
  outcome.h = outcome.p_value < alpha ? 1 : 0;
  return outcome;
}

}  // namespace tsmhpo
