#include "dsense/msm.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace dsense {

MsmProfile::MsmProfile(const Eigen::VectorXd& outcome, const Eigen::VectorXd& weight) {
  if (outcome.size() != weight.size())
    throw_config("MsmProfile: outcome and weight lengths differ");
  m_ = static_cast<int>(outcome.size());
  if (m_ == 0) throw_data("MsmProfile: empty control sample");
  for (int i = 0; i < m_; ++i)
    if (!(weight[i] > 0.0)) throw_config("MsmProfile: weights must be positive");

  std::vector<int> order(static_cast<std::size_t>(m_));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return outcome[a] > outcome[b]; });

  prefix_wy_.assign(static_cast<std::size_t>(m_) + 1, 0.0);
  prefix_w_.assign(static_cast<std::size_t>(m_) + 1, 0.0);
  for (int a = 0; a < m_; ++a) {
    const int i = order[static_cast<std::size_t>(a)];
    prefix_wy_[static_cast<std::size_t>(a) + 1] =
        prefix_wy_[static_cast<std::size_t>(a)] + weight[i] * outcome[i];
    prefix_w_[static_cast<std::size_t>(a) + 1] =
        prefix_w_[static_cast<std::size_t>(a)] + weight[i];
  }
  max_outcome_ = outcome[order.front()];
  min_outcome_ = outcome[order.back()];
}

double MsmProfile::hajek_mean() const {
  return prefix_wy_.back() / prefix_w_.back();
}

double MsmProfile::max_mean(double lambda) const {
  if (!(lambda >= 1.0)) throw_config("marginal sensitivity parameter must satisfy lambda >= 1");
  const double tot_wy = prefix_wy_.back();
  const double tot_w = prefix_w_.back();
  const double inv = 1.0 / lambda;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a <= m_; ++a) {
    const double num = lambda * prefix_wy_[static_cast<std::size_t>(a)] +
                       inv * (tot_wy - prefix_wy_[static_cast<std::size_t>(a)]);
    const double den = lambda * prefix_w_[static_cast<std::size_t>(a)] +
                       inv * (tot_w - prefix_w_[static_cast<std::size_t>(a)]);
    best = std::max(best, num / den);
  }
  return best;
}

double MsmProfile::min_mean(double lambda) const {
  if (!(lambda >= 1.0)) throw_config("marginal sensitivity parameter must satisfy lambda >= 1");
  const double tot_wy = prefix_wy_.back();
  const double tot_w = prefix_w_.back();
  const double inv = 1.0 / lambda;
  double best = std::numeric_limits<double>::infinity();
  // scale the top block down and the bottom block up
  for (int a = 0; a <= m_; ++a) {
    const double num = inv * prefix_wy_[static_cast<std::size_t>(a)] +
                       lambda * (tot_wy - prefix_wy_[static_cast<std::size_t>(a)]);
    const double den = inv * prefix_w_[static_cast<std::size_t>(a)] +
                       lambda * (tot_w - prefix_w_[static_cast<std::size_t>(a)]);
    best = std::min(best, num / den);
  }
  return best;
}

double MsmProfile::sup_outcome() const { return max_outcome_; }
double MsmProfile::min_outcome() const { return min_outcome_; }

}  // namespace dsense
