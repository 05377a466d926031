#pragma once

#include <vector>

#include "pathattr/attribution.hpp"
#include "pathattr/gig.hpp"
#include "pathattr/model.hpp"
#include "pathattr/shapley.hpp"

namespace pathattr {

struct PointPair {
  std::vector<double> ref;
  std::vector<double> expl;
};

struct BatchOptions {
  Method method = Method::Gig;
  GigConfig gig;
  SampledOptions sampled;   // ShapleySampled only; per-pair seed is derived
  int exact_max_features = kExactFeatureLimit;
  Exec exec = Exec::Serial;
};

// Attributes every pair, preserving input order. Pairs are independent, so
// the parallel lane distributes them across threads; outputs are written by
// index and match the serial lane bit for bit.
std::vector<AttributionResult> attribute_pairs(const Model& model,
                                               const std::vector<PointPair>& pairs,
                                               const BatchOptions& options = {});

}  // namespace pathattr
