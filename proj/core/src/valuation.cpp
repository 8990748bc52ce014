#include "dmd/valuation.hpp"

#include <cmath>
#include <limits>

#include "dmd/error.hpp"

namespace dmd {

namespace {
void require_domain(bool ok, const char* msg) {
  if (!ok) throw Error(ErrorKind::Domain, msg);
}
}  // namespace

void Valuation::check_params() const {
  require_domain(a > 0.0, "valuation parameter a must be positive");
  if (family == ValuationFamily::Power) {
    require_domain(alpha > 0.0 && alpha < 1.0, "power exponent alpha must lie in (0,1)");
  }
}

double Valuation::value(double x) const {
  switch (family) {
    case ValuationFamily::ScaledLog:
      require_domain(x > 0.0, "scaled-log valuation requires x > 0");
      return a * std::log(x);
    case ValuationFamily::ShiftedLog:
      require_domain(x >= 0.0, "shifted-log valuation requires x >= 0");
      return a * std::log1p(x);
    case ValuationFamily::Power:
      require_domain(x >= 0.0, "power valuation requires x >= 0");
      return a * std::pow(x, alpha);
  }
  return 0.0;
}

double Valuation::grad(double x) const {
  switch (family) {
    case ValuationFamily::ScaledLog:
      require_domain(x > 0.0, "scaled-log gradient requires x > 0");
      return a / x;
    case ValuationFamily::ShiftedLog:
      require_domain(x >= 0.0, "shifted-log gradient requires x >= 0");
      return a / (1.0 + x);
    case ValuationFamily::Power:
      require_domain(x >= 0.0, "power gradient requires x >= 0");
      if (x == 0.0) return std::numeric_limits<double>::infinity();
      return a * alpha * std::pow(x, alpha - 1.0);
  }
  return 0.0;
}

double Valuation::grad2(double x) const {
  switch (family) {
    case ValuationFamily::ScaledLog:
      require_domain(x > 0.0, "scaled-log curvature requires x > 0");
      return -a / (x * x);
    case ValuationFamily::ShiftedLog:
      require_domain(x >= 0.0, "shifted-log curvature requires x >= 0");
      return -a / ((1.0 + x) * (1.0 + x));
    case ValuationFamily::Power:
      require_domain(x > 0.0, "power curvature requires x > 0");
      return a * alpha * (alpha - 1.0) * std::pow(x, alpha - 2.0);
  }
  return 0.0;
}

double Valuation::grad_inverse(double p) const {
  require_domain(p > 0.0, "gradient inverse requires p > 0");
  switch (family) {
    case ValuationFamily::ScaledLog:
      return a / p;
    case ValuationFamily::ShiftedLog:
      return a / p - 1.0;
    case ValuationFamily::Power:
      return std::pow(p / (a * alpha), 1.0 / (alpha - 1.0));
  }
  return 0.0;
}

double Valuation::value_at_zero() const {
  if (family == ValuationFamily::ScaledLog) {
    return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

ValuationFamily valuation_family_from_string(const std::string& s) {
  if (s == "scaled-log") return ValuationFamily::ScaledLog;
  if (s == "shifted-log") return ValuationFamily::ShiftedLog;
  if (s == "power") return ValuationFamily::Power;
  throw Error(ErrorKind::Parse, "unknown valuation family: " + s);
}

std::string to_string(ValuationFamily f) {
  switch (f) {
    case ValuationFamily::ScaledLog: return "scaled-log";
    case ValuationFamily::ShiftedLog: return "shifted-log";
    case ValuationFamily::Power: return "power";
  }
  return "?";
}

}  // namespace dmd
