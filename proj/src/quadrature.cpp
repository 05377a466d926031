#include "pathattr/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace pathattr {

void gauss_legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex cache_mutex;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) {
      nodes = it->second.first;
      weights = it->second.second;
      return;
    }
  }

  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev initial guess, then Newton on P_n
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // recompute derivative at the converged root for the weight
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }

  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(n, std::make_pair(nodes, weights));
}

namespace {

struct PanelIntegrator {
  const std::function<void(double, std::span<double>)>& integrand;
  int dim;
  const QuadratureConfig& config;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> point_buffer;

  std::vector<double> panel_estimate(double a, double b) {
    std::vector<double> acc(dim, 0.0);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (size_t q = 0; q < nodes.size(); ++q) {
      integrand(mid + half * nodes[q], point_buffer);
      for (int i = 0; i < dim; ++i) acc[i] += weights[q] * point_buffer[i];
    }
    for (int i = 0; i < dim; ++i) acc[i] *= half;
    return acc;
  }

  void refine(double a, double b, const std::vector<double>& coarse, int depth,
              std::vector<double>& total, double& max_error) {
    const double mid = 0.5 * (a + b);
    const std::vector<double> left = panel_estimate(a, mid);
    const std::vector<double> right = panel_estimate(mid, b);

    bool converged = true;
    double worst = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double fine = left[i] + right[i];
      const double err = std::abs(coarse[i] - fine);
      worst = std::max(worst, err);
      // relative criterion with a small absolute floor so components that
      // integrate to ~0 can still converge
      if (err > std::max(config.rel_tol * std::abs(fine), 1e-14)) {
        converged = false;
      }
    }

    if (converged) {
      for (int i = 0; i < dim; ++i) total[i] += left[i] + right[i];
      max_error = std::max(max_error, worst);
      return;
    }
    if (depth >= config.max_depth) {
      for (int i = 0; i < dim; ++i) total[i] += left[i] + right[i];
      max_error = std::max(max_error, worst);
      throw QuadratureError(
          "quadrature failed to converge after " + std::to_string(config.max_depth) +
              " subdivision levels",
          total, worst);
    }
    refine(a, mid, left, depth + 1, total, max_error);
    refine(mid, b, right, depth + 1, total, max_error);
  }
};

}  // namespace

QuadratureResult integrate_adaptive(
    const std::function<void(double, std::span<double>)>& integrand, int dim,
    const QuadratureConfig& config) {
  QuadratureResult result;
  result.values.assign(dim, 0.0);
  if (dim == 0) return result;

  PanelIntegrator pi{integrand, dim, config, {}, {}, std::vector<double>(dim)};
  gauss_legendre_rule(config.nodes_per_panel, pi.nodes, pi.weights);

  const std::vector<double> coarse = pi.panel_estimate(0.0, 1.0);
  pi.refine(0.0, 1.0, coarse, 0, result.values, result.max_panel_error);
  return result;
}

}  // namespace pathattr
