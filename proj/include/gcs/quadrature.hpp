#pragma once

#include <cmath>
#include <vector>

#include "gcs/types.hpp"

namespace gcs {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss–Legendre rule on [a, b] (Newton iteration on P_n).
inline Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InvalidArgument("Gauss-Legendre needs at least one node");
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

/// Midpoint rule on the circle: φ_j = 2π(j + 1/2)/n, weights 2π/n.
/// Exact for trigonometric polynomials of degree < n.
inline Rule1D periodic_midpoint(int n) {
  if (n < 1) throw InvalidArgument("angular rule needs at least one node");
  Rule1D rule;
  for (int j = 0; j < n; ++j) {
    rule.nodes.push_back(2.0 * pi * (j + 0.5) / n);
    rule.weights.push_back(2.0 * pi / n);
  }
  return rule;
}

}  // namespace gcs
