#pragma once

#include <string>

namespace dmd {

// Strictly concave, strictly increasing, twice differentiable valuation
// families with closed-form gradients and gradient inverses.
enum class ValuationFamily {
  ScaledLog,   // a * ln(x),       x > 0
  ShiftedLog,  // a * ln(1 + x),   x >= 0
  Power,       // a * x^alpha,     x >= 0, alpha in (0,1)
};

struct Valuation {
  ValuationFamily family = ValuationFamily::ScaledLog;
  double a = 1.0;
  double alpha = 0.5;  // Power only

  double value(double x) const;
  double grad(double x) const;
  double grad2(double x) const;          // second derivative
  double grad_inverse(double p) const;   // x with grad(x) = p; may be negative
                                         // for ShiftedLog when p >= a
  // v(0); -inf for ScaledLog (see value_at_zero_is_neg_inf).
  double value_at_zero() const;
  bool value_at_zero_is_neg_inf() const { return family == ValuationFamily::ScaledLog; }

  // Smallest x in the family's domain (0 everywhere; ScaledLog is open at 0).
  bool domain_is_open_at_zero() const { return family == ValuationFamily::ScaledLog; }

  void check_params() const;  // throws Error(Domain) on bad parameters
};

ValuationFamily valuation_family_from_string(const std::string& s);
std::string to_string(ValuationFamily f);

}  // namespace dmd
