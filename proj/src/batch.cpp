#include "pathattr/batch.hpp"

#include <exception>

#include "pathattr/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pathattr {

namespace {

AttributionResult attribute_one(const Model& model, const PointPair& pair, size_t index,
                                const BatchOptions& options) {
  switch (options.method) {
    case Method::Gig:
      return gig_attribute(model, pair.ref, pair.expl, options.gig);
    case Method::ShapleyExact:
      return shapley_exact(model, pair.ref, pair.expl, options.exact_max_features);
    case Method::ShapleyPermutation:
      return shapley_permutation(model, pair.ref, pair.expl);
    case Method::ShapleySampled: {
      SampledOptions per_pair = options.sampled;
      per_pair.seed = derive_seed(options.sampled.seed, index);
      return shapley_sampled(model, pair.ref, pair.expl, per_pair).attribution;
    }
  }
  throw InputError("unknown attribution method");
}

}  // namespace

std::vector<AttributionResult> attribute_pairs(const Model& model,
                                               const std::vector<PointPair>& pairs,
                                               const BatchOptions& options) {
  std::vector<AttributionResult> results(pairs.size());

  if (options.exec == Exec::Serial) {
    for (size_t i = 0; i < pairs.size(); ++i) {
      results[i] = attribute_one(model, pairs[i], i, options);
    }
    return results;
  }

  // parallel lane: pairs are pure and independent; first exception wins and
  // is rethrown once every thread has drained
  std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(pairs.size()); ++i) {
    try {
      results[i] = attribute_one(model, pairs[i], static_cast<size_t>(i), options);
    } catch (...) {
#pragma omp critical
      {
        if (!first_error) first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace pathattr
