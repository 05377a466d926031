#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pathattr/attribution.hpp"
#include "pathattr/common.hpp"
#include "pathattr/gig.hpp"
#include "pathattr/model.hpp"

namespace pathattr {

inline constexpr int kExactFeatureLimit = 15;        // 2^n cached evaluations
inline constexpr int kPermutationFeatureLimit = 8;   // n! enumerated orderings

// Interventional (baseline) Shapley values, subset form. The 2^n masked
// scores are evaluated once and shared across all features. Above the
// feature limit raises InputError pointing at shapley_sampled.
AttributionResult shapley_exact(const Model& model, std::span<const double> x_ref,
                                std::span<const double> x_expl,
                                int max_features = kExactFeatureLimit);
AttributionResult shapley_exact(const ScoreFn& score, int n_features,
                                std::span<const double> x_ref,
                                std::span<const double> x_expl,
                                int max_features = kExactFeatureLimit);

// Permutation form: average marginal contribution over all n! feature
// orderings. Agrees with the subset form to within accumulated rounding;
// kept as an independent route for cross-validation.
AttributionResult shapley_permutation(const Model& model, std::span<const double> x_ref,
                                      std::span<const double> x_expl,
                                      int max_features = kPermutationFeatureLimit);
AttributionResult shapley_permutation(const ScoreFn& score, int n_features,
                                      std::span<const double> x_ref,
                                      std::span<const double> x_expl,
                                      int max_features = kPermutationFeatureLimit);

// ============================================================================
// Convergence-monitored estimators
// ============================================================================

// Running mean with per-feature standard errors over whatever population was
// consumed (references or sampled permutations).
struct ConvergenceReport {
  std::vector<double> mean_phi;
  std::vector<double> stderr_phi;  // NaN entries when n_used < 2
  int n_used = 0;
  int n_failed = 0;
  bool converged = false;
  // mean of the consumed per-pair efficiency residuals
  double mean_residual = 0.0;
};

struct SampledOptions {
  uint64_t seed = 0;
  double target_stderr = 1e-3;
  int max_permutations = 10000;
  // the stopping criterion cannot trigger before this many samples
  int min_samples = 8;
};

struct SampledResult {
  AttributionResult attribution;
  ConvergenceReport report;
};

// Unbiased permutation-sampling estimator: uniform random orderings, one
// marginal contribution per feature per ordering. Stops once every feature's
// stderr drops below target_stderr (never before min_samples) or at the
// permutation cap (converged=false). Same seed gives bit-identical output.
SampledResult shapley_sampled(const Model& model, std::span<const double> x_ref,
                              std::span<const double> x_expl,
                              const SampledOptions& options = {});
SampledResult shapley_sampled(const ScoreFn& score, int n_features,
                              std::span<const double> x_ref,
                              std::span<const double> x_expl,
                              const SampledOptions& options = {});

// ============================================================================
// Expectations over a reference population
// ============================================================================

struct ReferenceSet {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;  // empty = uniform

  void validate(int n_features) const;
};

// Single-pair attribution hook: phi for explaining x_expl against x_ref.
using PairAttributor =
    std::function<AttributionResult(std::span<const double> x_expl,
                                    std::span<const double> x_ref)>;

struct ExpectationOptions {
  // all-features stderr threshold for early stopping; 0 disables and the
  // whole population is consumed
  double target_stderr = 0.0;
  uint64_t shuffle_seed = 0;
  // the stopping criterion cannot trigger before this many references
  int min_samples = 8;
  Exec exec = Exec::Serial;
  // references are attributed in blocks of this size (the parallel lane
  // evaluates a block concurrently; consumption order stays fixed)
  int block_size = 32;
};

// Mean attribution over the reference set, consumed in seeded-shuffle order
// with running per-feature standard errors. A failing attributor (throw or
// NaN output) poisons only that reference. The reported mean/stderr are
// computed with a fixed pairwise reduction, so serial and parallel lanes
// return bit-identical reports.
ConvergenceReport expected_attribution(const PairAttributor& attributor,
                                       const ReferenceSet& refs,
                                       std::span<const double> x_expl,
                                       const ExpectationOptions& options = {});

// Adaptors for the two engines. The model must outlive the returned functor.
PairAttributor make_gig_attributor(const Model& model, const GigConfig& config = {});
PairAttributor make_shapley_exact_attributor(const Model& model,
                                             int max_features = kExactFeatureLimit);

}  // namespace pathattr
