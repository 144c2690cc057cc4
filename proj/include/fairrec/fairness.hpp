#pragma once

#include <string>
#include <vector>

#include "fairrec/nn.hpp"

namespace fairrec {

// Per-group conversion counts and the normalized allocation vector.
// x_i = counts_i / total when total > 0, otherwise all zeros.
struct AllocationState {
  std::vector<long long> counts;
  long long total = 0;
  Vec x;

  AllocationState() = default;
  explicit AllocationState(int n_groups)
      : counts(static_cast<std::size_t>(n_groups), 0),
        x(static_cast<std::size_t>(n_groups), 0.0) {}

  int n_groups() const { return static_cast<int>(counts.size()); }
};

// Pure update: returns a new state with one more conversion in `group`.
AllocationState record_conversion(const AllocationState& state, int group);

// w_i / sum(w). All weights must be strictly positive.
Vec optimal_allocation(const Vec& weights);

// sum_i w_i * ln(1 + x_i). Entries of x must be non-negative.
double prop_fair(const Vec& x, const Vec& weights);

struct FairnessConfig {
  Vec weights;
  double lambda = 2.0;  // penalty for undesired feedback, > 1
  Vec x_star;           // optimal allocation for `weights`
};

FairnessConfig make_fairness_config(Vec weights, double lambda);

// Two-fold reward. `state` is the allocation before recording the current
// conversion: x_star[group] - x[group] + 1 on desired feedback, -lambda
// otherwise.
double conversion_reward(bool desired, int group, const AllocationState& state,
                         const FairnessConfig& config);

// CSV "step,group0,...,group{l-1}", one row per snapshot.
void write_allocation_trajectory_csv(const std::string& path,
                                     const std::vector<Vec>& snapshots);

}  // namespace fairrec
