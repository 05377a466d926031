#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pathattr/common.hpp"

namespace pathattr {

struct QuadratureConfig {
  // Gauss-Legendre nodes per panel.
  int nodes_per_panel = 16;
  // A panel is accepted once its estimate agrees with the sum of its halves
  // to this relative tolerance per component (with a tiny absolute floor for
  // near-zero components).
  double rel_tol = 1e-9;
  // Panels are bisected at most this many levels deep; running out raises
  // QuadratureError carrying the best estimate.
  int max_depth = 40;
};

struct QuadratureResult {
  std::vector<double> values;
  // largest per-component disagreement among accepted panels
  double max_panel_error = 0.0;
};

// Adaptive Gauss-Legendre integration of a vector-valued integrand over
// [0, 1]. `integrand(alpha, out)` fills `out` (dim components) with the value
// at alpha.
QuadratureResult integrate_adaptive(
    const std::function<void(double, std::span<double>)>& integrand, int dim,
    const QuadratureConfig& config = {});

// Nodes/weights for n-point Gauss-Legendre on [-1, 1] (Newton iteration on
// the Legendre recurrence; cached per order).
void gauss_legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace pathattr
