#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathattr {

// ============================================================================
// Error taxonomy
//
// InputError / SchemaError: caller handed us something unusable (CLI exit 2).
// ComputationError and children: valid input, computation could not finish
// within its contract (CLI exit 3).
// ============================================================================

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  // JSON-pointer-ish location of the offending field, e.g. "$.trees[0].left[2]"
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class UnsupportedOperation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CornerTooWideError : public ComputationError {
 public:
  CornerTooWideError(const std::string& message, std::vector<int> features)
      : ComputationError(message), features_(std::move(features)) {}
  const std::vector<int>& features() const { return features_; }

 private:
  std::vector<int> features_;
};

class QuadratureError : public ComputationError {
 public:
  QuadratureError(const std::string& message, std::vector<double> best_estimate,
                  double residual)
      : ComputationError(message),
        best_estimate_(std::move(best_estimate)),
        residual_(residual) {}
  const std::vector<double>& best_estimate() const { return best_estimate_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> best_estimate_;
  double residual_;
};

// ============================================================================
// Execution lanes
// ============================================================================

// Serial is the reference implementation; Parallel is the OpenMP lane.
// Both lanes must produce bit-identical results (reduction order is fixed).
enum class Exec { Serial, Parallel };

// ============================================================================
// Numerics helpers
// ============================================================================

// Sum with a fixed pairwise reduction tree. Result does not depend on how the
// values were produced (thread count, interleaving), only on their order.
double pairwise_sum(std::span<const double> values);

// Weighted pairwise sum: sum of values[i] * weights[i].
double pairwise_dot(std::span<const double> values, std::span<const double> weights);

}  // namespace pathattr
