#include "fairrec/fairness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fairrec {

AllocationState record_conversion(const AllocationState& state, int group) {
  if (group < 0 || group >= state.n_groups()) {
    throw std::out_of_range("record_conversion: group index out of range");
  }
  AllocationState next = state;
  next.counts[group] += 1;
  next.total += 1;
  for (int i = 0; i < next.n_groups(); ++i) {
    next.x[i] = static_cast<double>(next.counts[i]) /
                static_cast<double>(next.total);
  }
  return next;
}

Vec optimal_allocation(const Vec& weights) {
  if (weights.empty()) {
    throw std::invalid_argument("optimal_allocation: empty weights");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("optimal_allocation: weights must be positive");
    }
    sum += w;
  }
  Vec x(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) x[i] = weights[i] / sum;
  return x;
}

double prop_fair(const Vec& x, const Vec& weights) {
  if (x.size() != weights.size()) {
    throw std::invalid_argument("prop_fair: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0) {
      throw std::domain_error("prop_fair: negative allocation entry");
    }
    s += weights[i] * std::log1p(x[i]);
  }
  return s;
}

FairnessConfig make_fairness_config(Vec weights, double lambda) {
  if (!(lambda > 1.0)) {
    throw std::invalid_argument("make_fairness_config: lambda must exceed 1");
  }
  FairnessConfig cfg;
  cfg.x_star = optimal_allocation(weights);
  cfg.weights = std::move(weights);
  cfg.lambda = lambda;
  return cfg;
}

double conversion_reward(bool desired, int group, const AllocationState& state,
                         const FairnessConfig& config) {
  if (group < 0 || group >= static_cast<int>(config.x_star.size()) ||
      group >= state.n_groups()) {
    throw std::out_of_range("conversion_reward: group index out of range");
  }
  if (!desired) return -config.lambda;
  return config.x_star[group] - state.x[group] + 1.0;
}

void write_allocation_trajectory_csv(const std::string& path,
                                     const std::vector<Vec>& snapshots) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  const std::size_t l = snapshots.empty() ? 0 : snapshots.front().size();
  out << "step";
  for (std::size_t g = 0; g < l; ++g) out << ",group" << g;
  out << "\n";
  char buf[32];
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    out << t;
    for (double v : snapshots[t]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace fairrec
