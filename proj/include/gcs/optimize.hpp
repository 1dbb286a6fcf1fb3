#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "gcs/types.hpp"

namespace gcs::optimize {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double f_tol = 1e-15;
  double x_tol = 1e-10;
  int max_iterations = 500;
};

struct NelderMeadResult {
  RealVector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes f by the Nelder–Mead simplex method (standard coefficients).
inline NelderMeadResult nelder_mead(const std::function<double(const RealVector&)>& f, const RealVector& x0,
                                    const NelderMeadOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  std::vector<RealVector> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += opt.initial_step;
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = f(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  NelderMeadResult result;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    result.iterations = iter;

    double size = 0.0;
    for (std::size_t i = 1; i < order.size(); ++i)
      size = std::max(size, (simplex[order[i]] - simplex[best]).cwiseAbs().maxCoeff());
    if (std::abs(values[worst] - values[best]) <= opt.f_tol && size <= opt.x_tol) {
      result.converged = true;
      break;
    }

    RealVector centroid = RealVector::Zero(n);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += simplex[order[i]];
    centroid /= static_cast<double>(n);

    const RealVector reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const RealVector expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const RealVector contracted =
        outside ? RealVector(centroid + 0.5 * (reflected - centroid)) : RealVector(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = f(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i < order.size(); ++i) {
      const std::size_t k = order[i];
      simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
      values[k] = f(simplex[k]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  const std::size_t b = static_cast<std::size_t>(it - values.begin());
  result.x = simplex[b];
  result.value = values[b];
  return result;
}

}  // namespace gcs::optimize
