#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pathattr/attribution.hpp"
#include "pathattr/model.hpp"
#include "pathattr/paths.hpp"
#include "pathattr/quadrature.hpp"
#include "pathattr/splits.hpp"

namespace pathattr {

struct GigConfig {
  QuadratureConfig quadrature;
  // Maximum number of features meeting at one corner (2^k score evaluations);
  // wider corners raise CornerTooWideError instead of being sampled.
  int corner_limit = 20;
};

// Shapley credits from the 2^k orthant values, values[mask] being the score
// with exactly the features whose bit is set on their post-crossing side.
// Returns one credit per feature bit; the credits sum to
// values[all] - values[none].
std::vector<double> shapley_from_orthant_values(std::span<const double> values, int k);

// Shapley split of the score jump where `crossing_features` (ascending) cross
// their hyperplanes at one path point. Each orthant is scored by displacing
// every crossing feature off its threshold to the midpoint toward that
// feature's nearest other split value in the model (fallback: a relative
// 1e-9 nudge), on the pre- or post-crossing side given by the per-feature
// direction sign. Credits are returned in crossing_features order.
std::vector<double> orthant_shapley(const Model& model,
                                    std::span<const double> corner_point,
                                    std::span<const int> crossing_features,
                                    std::span<const double> thresholds,
                                    std::span<const double> direction_signs,
                                    int corner_limit = 20);

// Straight-line attribution from x_ref to x_expl. Tree parts contribute
// through their crossing events (score jumps assigned to the crossing
// feature, corners split by orthant Shapley values); analytic parts
// contribute per-feature gradient quadrature along the line. Either
// mechanism alone and weighted mixtures of both are supported.
AttributionResult gig_attribute(const Model& model, std::span<const double> x_ref,
                                std::span<const double> x_expl,
                                const GigConfig& config = {});

// Gradient path integration of an analytic model along any of the
// piecewise-linear paths. No discontinuity handling: meant for continuous
// models (path-choice studies, separability checks).
AttributionResult ig_attribute_path(const AnalyticModel& model, const Path& path,
                                    const QuadratureConfig& config = {});

// Generic-gradient variant (e.g. reparametrized problems).
AttributionResult ig_attribute_path(const GradFn& grad, const ScoreFn& score,
                                    int n_features, const Path& path,
                                    const QuadratureConfig& config = {});

// How much the feature-0 credit differs between two paths with shared
// endpoints on a 2D model with constant mixed partials, next to the closed-
// form prediction: mixed partial times the signed area swept between the
// paths (shoelace over path_a followed by path_b reversed, clockwise
// positive).
struct TheoremGapResult {
  double observed_gap = 0.0;   // phi_0(path_a) - phi_0(path_b), by quadrature
  double predicted_gap = 0.0;  // mixed_partial * signed_area
  double signed_area = 0.0;
  double mixed_partial = 0.0;
};

TheoremGapResult theorem_gap(const AnalyticModel& model, const Path& path_a,
                             const Path& path_b, const QuadratureConfig& config = {});

}  // namespace pathattr
