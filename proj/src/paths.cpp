#include "pathattr/paths.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pathattr {

namespace {

void check_same_dim(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw InputError("path endpoints have mismatched dimensions");
  }
  if (a.empty()) throw InputError("path endpoints must be non-empty");
  for (double v : a) {
    if (std::isnan(v)) throw InputError("path endpoint contains NaN");
  }
  for (double v : b) {
    if (std::isnan(v)) throw InputError("path endpoint contains NaN");
  }
}

}  // namespace

Path Path::straight_line(std::vector<double> start, std::vector<double> end) {
  check_same_dim(start, end);
  return Path(PathKind::StraightLine, std::move(start), std::move(end));
}

Path Path::serial_cost_sharing(std::vector<double> start, std::vector<double> end) {
  check_same_dim(start, end);
  return Path(PathKind::SerialCostSharing, std::move(start), std::move(end));
}

Path Path::axis_permutation(std::vector<double> start, std::vector<double> end,
                            std::vector<int> order) {
  check_same_dim(start, end);
  const int n = static_cast<int>(start.size());
  if (static_cast<int>(order.size()) != n) {
    throw InputError("axis permutation order must list every feature exactly once");
  }
  std::vector<bool> seen(n, false);
  for (int f : order) {
    if (f < 0 || f >= n || seen[f]) {
      throw InputError("axis permutation order must be a permutation of 0..n-1");
    }
    seen[f] = true;
  }
  Path p(PathKind::AxisPermutation, std::move(start), std::move(end));
  p.order_ = std::move(order);
  return p;
}

Path Path::piecewise_linear(std::vector<std::vector<double>> waypoints) {
  if (waypoints.size() < 2) {
    throw InputError("piecewise linear path needs at least two waypoints");
  }
  for (const auto& w : waypoints) check_same_dim(waypoints.front(), w);
  Path p(PathKind::PiecewiseLinear, waypoints.front(), waypoints.back());
  p.waypoints_ = std::move(waypoints);
  return p;
}

std::vector<double> Path::point_at(double alpha) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InputError("path parameter must lie in [0, 1]");
  }
  // exact endpoints by construction
  if (alpha == 0.0) return start_;
  if (alpha == 1.0) return end_;

  const int n = dim();
  std::vector<double> out(n);
  switch (kind_) {
    case PathKind::StraightLine: {
      for (int i = 0; i < n; ++i) {
        out[i] = start_[i] + alpha * (end_[i] - start_[i]);
      }
      return out;
    }
    case PathKind::SerialCostSharing: {
      double rate = 0.0;
      for (int i = 0; i < n; ++i) {
        rate = std::max(rate, std::abs(end_[i] - start_[i]));
      }
      if (rate == 0.0) return start_;
      for (int i = 0; i < n; ++i) {
        const double delta = end_[i] - start_[i];
        const double travelled = std::min(alpha * rate, std::abs(delta));
        out[i] = travelled == std::abs(delta) ? end_[i]
                                              : start_[i] + std::copysign(travelled, delta);
      }
      return out;
    }
    case PathKind::AxisPermutation: {
      const double scaled = alpha * n;
      int seg = std::min(static_cast<int>(scaled), n - 1);
      const double t = scaled - seg;
      for (int k = 0; k < n; ++k) {
        const int f = order_[k];
        if (k < seg) {
          out[f] = end_[f];
        } else if (k > seg) {
          out[f] = start_[f];
        } else {
          out[f] = t >= 1.0 ? end_[f] : start_[f] + t * (end_[f] - start_[f]);
        }
      }
      return out;
    }
    case PathKind::PiecewiseLinear: {
      const int n_seg = static_cast<int>(waypoints_.size()) - 1;
      const double scaled = alpha * n_seg;
      const int seg = std::min(static_cast<int>(scaled), n_seg - 1);
      const double t = scaled - seg;
      const auto& a = waypoints_[seg];
      const auto& b = waypoints_[seg + 1];
      for (int i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
      return out;
    }
  }
  return out;  // unreachable
}

std::vector<std::vector<double>> Path::polyline() const {
  switch (kind_) {
    case PathKind::StraightLine:
      return {start_, end_};
    case PathKind::SerialCostSharing: {
      const int n = dim();
      double rate = 0.0;
      for (int i = 0; i < n; ++i) rate = std::max(rate, std::abs(end_[i] - start_[i]));
      if (rate == 0.0) return {start_, end_};
      // vertices where some coordinate reaches its end value
      std::set<double> arrivals;
      for (int i = 0; i < n; ++i) {
        const double d = std::abs(end_[i] - start_[i]);
        if (d > 0.0) arrivals.insert(d);
      }
      std::vector<std::vector<double>> verts;
      verts.push_back(start_);
      for (double travelled : arrivals) {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) {
          const double delta = end_[i] - start_[i];
          v[i] = std::abs(delta) <= travelled
                     ? end_[i]
                     : start_[i] + std::copysign(travelled, delta);
        }
        verts.push_back(std::move(v));
      }
      return verts;
    }
    case PathKind::AxisPermutation: {
      std::vector<std::vector<double>> verts;
      verts.push_back(start_);
      std::vector<double> cur = start_;
      for (int f : order_) {
        cur[f] = end_[f];
        verts.push_back(cur);
      }
      return verts;
    }
    case PathKind::PiecewiseLinear:
      return waypoints_;
  }
  return {};  // unreachable
}

std::vector<double> masked_point(std::span<const double> x, std::span<const double> ref,
                                 FeatureSubset s) {
  if (x.size() != ref.size()) {
    throw InputError("masked_point: point and reference dimensions differ");
  }
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = s.contains(static_cast<int>(i)) ? x[i] : ref[i];
  }
  return out;
}

// ============================================================================
// transform_feature
// ============================================================================

TransformedProblem::TransformedProblem(Model base, int feature, FeatureTransform transform,
                                       std::vector<double> ref, std::vector<double> expl)
    : base_(std::move(base)),
      feature_(feature),
      transform_(std::move(transform)),
      ref_(std::move(ref)),
      expl_(std::move(expl)) {}

std::vector<double> TransformedProblem::pull_back(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  y[feature_] = transform_.inverse(x[feature_]);
  return y;
}

double TransformedProblem::eval(std::span<const double> x) const {
  return base_.eval(pull_back(x));
}

std::vector<double> TransformedProblem::grad(std::span<const double> x) const {
  std::vector<double> g = base_.grad(pull_back(x));
  g[feature_] *= transform_.inverse_deriv(x[feature_]);
  return g;
}

TransformedProblem transform_feature(const Model& base, std::span<const double> ref,
                                     std::span<const double> expl, int feature,
                                     FeatureTransform transform) {
  if (feature < 0 || feature >= base.n_features()) {
    throw InputError("transform_feature: feature index out of range");
  }
  base.check_dimension(ref);
  base.check_dimension(expl);
  if (!transform.forward || !transform.inverse || !transform.inverse_deriv) {
    throw InputError("transform_feature: map must provide forward, inverse and inverse_deriv");
  }

  // sampled monotonicity probe over the range the attribution will touch
  const double lo = std::min(ref[feature], expl[feature]);
  const double hi = std::max(ref[feature], expl[feature]);
  const double pad = 0.5 * (hi - lo) + 1e-3;
  const int probes = 65;
  std::vector<double> vals(probes);
  for (int k = 0; k < probes; ++k) {
    const double u = (lo - pad) + (hi - lo + 2 * pad) * k / (probes - 1);
    vals[k] = transform.forward(u);
    const double back = transform.inverse(vals[k]);
    if (std::abs(back - u) > 1e-6 * std::max(1.0, std::abs(u))) {
      throw InputError("transform_feature: inverse does not invert forward");
    }
  }
  int direction = 0;
  for (int k = 1; k < probes; ++k) {
    const int step = vals[k] > vals[k - 1] ? 1 : (vals[k] < vals[k - 1] ? -1 : 0);
    if (step == 0 || (direction != 0 && step != direction)) {
      throw InputError("transform_feature: map is not strictly monotone");
    }
    direction = step;
  }

  std::vector<double> t_ref(ref.begin(), ref.end());
  std::vector<double> t_expl(expl.begin(), expl.end());
  t_ref[feature] = transform.forward(ref[feature]);
  t_expl[feature] = transform.forward(expl[feature]);
  return TransformedProblem(base, feature, std::move(transform), std::move(t_ref),
                            std::move(t_expl));
}

}  // namespace pathattr
