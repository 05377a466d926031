#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pathattr {

// Generic evaluation hooks; anything scoring a point can be attributed.
using ScoreFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

enum class Method { Gig, ShapleyExact, ShapleyPermutation, ShapleySampled };

constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::Gig: return "gig";
    case Method::ShapleyExact: return "shapley-exact";
    case Method::ShapleyPermutation: return "shapley-permutation";
    case Method::ShapleySampled: return "shapley-sampled";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name);

// Per-feature credits phi for one (reference, explanation) pair, in score
// units. sum(phi) - (f(expl) - f(ref)) is kept as the efficiency residual;
// exact methods hold it below 1e-9 absolute, quadrature below the integrator
// tolerance.
struct AttributionResult {
  std::vector<double> phi;
  double efficiency_residual = 0.0;
  Method method = Method::Gig;
  // sampled estimators only
  std::optional<std::vector<double>> stderr_phi;
};

}  // namespace pathattr
