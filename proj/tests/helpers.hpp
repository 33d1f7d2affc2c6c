#pragma once

#include <random>
#include <utility>
#include <vector>

#include "dsense/data.hpp"
#include "dsense/msm.hpp"

namespace dsense::testing {

// Table with explicit outcome/treatment and a single covariate.
inline ObservationTable toy_table(std::vector<double> y, std::vector<int> z,
                                  std::vector<double> x) {
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXi zv = Eigen::Map<Eigen::VectorXi>(z.data(), n);
  Eigen::MatrixXd xv(n, 1);
  for (int i = 0; i < n; ++i) xv(i, 0) = x[static_cast<std::size_t>(i)];
  return make_table(std::move(yv), std::move(zv), std::move(xv));
}

// Independent oracle for the marginal-model extrema: enumerate every vertex
// of the box {w_i * L, w_i / L}^m and take the worst tilted Hajek mean. The
// linear-fractional objective attains its optimum at a vertex, so this is
// exhaustive.
inline std::pair<double, double> msm_brute_force(const Eigen::VectorXd& y,
                                                 const Eigen::VectorXd& w, double lambda) {
  const int m = static_cast<int>(y.size());
  double best_max = -1e300;
  double best_min = 1e300;
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < m; ++i) {
      const double wi = (mask >> i) & 1 ? w[i] * lambda : w[i] / lambda;
      num += wi * y[i];
      den += wi;
    }
    const double mean = num / den;
    best_max = std::max(best_max, mean);
    best_min = std::min(best_min, mean);
  }
  return {best_min, best_max};
}

}  // namespace dsense::testing
