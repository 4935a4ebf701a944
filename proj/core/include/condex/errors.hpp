#pragma once

#include <stdexcept>
#include <string>

namespace condex {

// Base class for every error thrown by the library.  Each subclass carries a
// stable machine-readable code so the CLI can emit structured diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Argument outside its documented domain (probabilities, thresholds, ...).
struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error("domain_error", m) {}
};

// Too few observations to carry out a fit or an empirical summary.
struct InsufficientData : Error {
  explicit InsufficientData(const std::string& m)
      : Error("insufficient_data", m) {}
};

// Numerical optimiser failed to produce a finite optimum.
struct FitDiverged : Error {
  explicit FitDiverged(const std::string& m) : Error("fit_diverged", m) {}
};

// No feasible starting point found for a constrained fit.
struct InfeasibleStart : Error {
  explicit InfeasibleStart(const std::string& m)
      : Error("infeasible_start", m) {}
};

// A test statistic came out NaN or infinite.
struct NonFiniteStatistic : Error {
  explicit NonFiniteStatistic(const std::string& m)
      : Error("non_finite_statistic", m) {}
};

// Too many bootstrap replicates failed to refit.
struct BootstrapUnstable : Error {
  explicit BootstrapUnstable(const std::string& m)
      : Error("bootstrap_unstable", m) {}
};

// Too many simulation-study replicates failed.
struct StudyUnstable : Error {
  explicit StudyUnstable(const std::string& m) : Error("study_unstable", m) {}
};

// Not enough joint tail points to estimate a conditional measure.
struct TooFewTailPoints : Error {
  explicit TooFewTailPoints(const std::string& m)
      : Error("too_few_tail_points", m) {}
};

// Prediction requested for a dose group absent from the fitted state.
struct UnfittedDose : Error {
  explicit UnfittedDose(const std::string& m) : Error("unfitted_dose", m) {}
};

// Malformed input table (missing column, bad number, ...).
struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error("schema_error", m) {}
};

}  // namespace condex
