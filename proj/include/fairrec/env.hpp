#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairrec/agent.hpp"
#include "fairrec/dataset.hpp"
#include "fairrec/fairness.hpp"

namespace fairrec {

enum class AllocScope {
  global,       // allocation persists across episodes until reset_allocation
  per_episode,  // allocation starts from zero at every reset
};

struct EnvConfig {
  int horizon = 20;  // episode length cap; effective T = min(cap, rated count)
  int history_len = 5;
  AllocScope scope = AllocScope::global;
};

struct Episode {
  int user_id = 0;
  std::vector<int> candidates;  // user's rated items not yet recommended
  UserState state;
  int t = 0;
  int horizon = 0;
  bool done = false;
};

struct StepOutcome {
  bool desired = false;
  double reward = 0.0;
  bool done = false;
};

struct StepRecord {
  int user = 0;
  int step = 0;
  int item = 0;
  int group = 0;
  bool desired = false;
  double reward = 0.0;
};

void write_trace_csv(const std::string& path,
                     const std::vector<StepRecord>& trace);

// Offline replay environment: candidates are the user's logged items,
// feedback is the logged desired flag, history advances on positive
// feedback only, and desired conversions accumulate into the shared
// allocation vector.
class SimEnv {
 public:
  SimEnv(const InteractionLog& log, const ItemCatalog& catalog,
         FairnessConfig fairness, EnvConfig cfg);

  Episode reset(int user_id);
  StepOutcome step(Episode& episode, int item_id);

  const AllocationState& allocation() const { return alloc_; }
  void reset_allocation();

  const std::vector<StepRecord>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

  const EnvConfig& config() const { return cfg_; }
  const FairnessConfig& fairness() const { return fairness_; }
  std::vector<int> known_users() const;

 private:
  const ItemCatalog* catalog_;
  FairnessConfig fairness_;
  EnvConfig cfg_;
  UserIndex per_user_;
  std::unordered_map<int, std::unordered_map<int, bool>> feedback_;
  AllocationState alloc_;
  std::vector<StepRecord> trace_;
};

}  // namespace fairrec
