#pragma once

#include <Eigen/Dense>

#include "dsense/common.hpp"

namespace dsense {

// Sorted-cutoff machinery for the marginal sensitivity model. The worst-case
// tilted Hajek mean over the box [w/L, wL] is attained by scaling the weights
// of the top block of outcomes by L and the rest by 1/L (Zhao's Proposition 2
// vertex argument), so the extrema reduce to a scan over the m+1 cutoffs of
// the outcome order statistics. Construction is O(m log m); each evaluation
// at a new L is O(m) using prefix sums.
class MsmProfile {
 public:
  MsmProfile() = default;
  // Pairs with nonpositive weights are rejected; ties in the outcome keep
  // their input order (the cutoff objective is invariant to tie order).
  MsmProfile(const Eigen::VectorXd& outcome, const Eigen::VectorXd& weight);

  int size() const { return m_; }
  bool empty() const { return m_ == 0; }

  // Hajek mean of the untilted sample (lambda = 1 objective).
  double hajek_mean() const;
  // max / min over cutoffs of the tilted Hajek control mean.
  double max_mean(double lambda) const;
  double min_mean(double lambda) const;
  // Supremum of max_mean over lambda: the largest outcome carrying weight.
  double sup_outcome() const;
  double min_outcome() const;

 private:
  int m_ = 0;
  // descending outcome order
  std::vector<double> prefix_wy_;  // prefix_wy_[a] = sum of w*y over top a units
  std::vector<double> prefix_w_;
  double max_outcome_ = 0.0;
  double min_outcome_ = 0.0;
};

}  // namespace dsense
