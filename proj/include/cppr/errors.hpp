#pragma once

#include <stdexcept>
#include <string>

namespace cppr {

/// Input outside its documented domain (bad geometry, negative length, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An actuation value or bend angle outside the configured limits. `bound`
/// names the violated limit (e.g. "q_p_max", "D_max(proximal)").
class LimitViolation : public std::out_of_range {
 public:
  LimitViolation(std::string bound, const std::string& what)
      : std::out_of_range(what), bound_(std::move(bound)) {}
  const std::string& bound() const noexcept { return bound_; }

 private:
  std::string bound_;
};

/// Distal segment retracted into the proximal lumen (q_d < 0) with an
/// incompatible direction angle or curvature. `field` is "phi_d" or "curvature".
class NestingViolation : public std::domain_error {
 public:
  NestingViolation(std::string field, const std::string& what)
      : std::domain_error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class SingularityError : public std::runtime_error {
 public:
  SingularityError(double condition, const std::string& what)
      : std::runtime_error(what), condition_(condition) {}
  /// sigma_min / sigma_max of the task Jacobian at the failing pose.
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Numerical breakdown inside the solver (NaN objective).
class SolverFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace cppr
