#include "fairrec/env.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fairrec {

void write_trace_csv(const std::string& path,
                     const std::vector<StepRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "user,step,item,group,desired,reward\n";
  char buf[32];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.reward);
    out << r.user << ',' << r.step << ',' << r.item << ',' << r.group << ','
        << (r.desired ? 1 : 0) << ',' << buf << "\n";
  }
}

SimEnv::SimEnv(const InteractionLog& log, const ItemCatalog& catalog,
               FairnessConfig fairness, EnvConfig cfg)
    : catalog_(&catalog),
      fairness_(std::move(fairness)),
      cfg_(cfg),
      per_user_(build_user_index(log)),
      alloc_(catalog.n_groups) {
  if (cfg_.horizon < 1) throw std::invalid_argument("SimEnv: horizon must be >= 1");
  if (cfg_.history_len < 1) {
    throw std::invalid_argument("SimEnv: history length must be >= 1");
  }
  for (const auto& rec : log.records) {
    feedback_[rec.user_id][rec.item_id] = rec.desired;
  }
}

std::vector<int> SimEnv::known_users() const {
  std::vector<int> users;
  users.reserve(per_user_.size());
  for (const auto& [user, recs] : per_user_) users.push_back(user);
  return users;
}

void SimEnv::reset_allocation() {
  alloc_ = AllocationState(catalog_->n_groups);
}

Episode SimEnv::reset(int user_id) {
  auto it = per_user_.find(user_id);
  if (it == per_user_.end() || it->second.empty()) {
    throw std::out_of_range("SimEnv::reset: unknown user " +
                            std::to_string(user_id));
  }
  const auto& recs = it->second;
  if (cfg_.scope == AllocScope::per_episode) reset_allocation();

  Episode ep;
  ep.user_id = user_id;

  // History: the earliest positive interactions, padded to length N with
  // sentinels at the front so the most recent item sits last.
  std::vector<int> positives;
  for (const auto& rec : recs) {
    if (rec.desired) {
      positives.push_back(rec.item_id);
      if (static_cast<int>(positives.size()) == cfg_.history_len) break;
    }
  }
  ep.state.history.assign(static_cast<std::size_t>(cfg_.history_len),
                          kSentinelItem);
  std::copy(positives.begin(), positives.end(),
            ep.state.history.end() - static_cast<std::ptrdiff_t>(positives.size()));
  ep.state.alloc_x = alloc_.x;

  for (const auto& rec : recs) {
    if (std::find(positives.begin(), positives.end(), rec.item_id) ==
        positives.end()) {
      ep.candidates.push_back(rec.item_id);
    }
  }
  std::sort(ep.candidates.begin(), ep.candidates.end());

  ep.t = 0;
  ep.horizon = std::min<int>(cfg_.horizon, static_cast<int>(recs.size()));
  ep.done = ep.candidates.empty();
  return ep;
}

StepOutcome SimEnv::step(Episode& ep, int item_id) {
  if (ep.done) throw std::logic_error("SimEnv::step: episode already finished");
  auto pos = std::lower_bound(ep.candidates.begin(), ep.candidates.end(),
                              item_id);
  if (pos == ep.candidates.end() || *pos != item_id) {
    throw std::runtime_error("SimEnv::step: item " + std::to_string(item_id) +
                             " not in candidate pool");
  }
  const bool desired = feedback_.at(ep.user_id).at(item_id);
  const int group = catalog_->group(item_id);
  const double reward = conversion_reward(desired, group, alloc_, fairness_);

  if (desired) {
    alloc_ = record_conversion(alloc_, group);
    ep.state.history.erase(ep.state.history.begin());
    ep.state.history.push_back(item_id);
  }
  ep.candidates.erase(pos);

  trace_.push_back({ep.user_id, ep.t, item_id, group, desired, reward});
  ep.t += 1;
  ep.state.alloc_x = alloc_.x;
  ep.done = ep.t >= ep.horizon || ep.candidates.empty();
  return {desired, reward, ep.done};
}

}  // namespace fairrec
