#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairrec/nn.hpp"

namespace fairrec {

struct Interaction {
  int user_id = 0;
  int item_id = 0;
  int rating = 0;  // 1..5
  std::int64_t timestamp = 0;
  bool desired = false;  // rating > threshold
};

struct InteractionLog {
  std::vector<Interaction> records;
  int rating_threshold = 3;

  std::vector<int> user_ids() const;  // sorted distinct
  std::vector<int> item_ids() const;  // sorted distinct
};

// Per-user records ordered by (timestamp, item_id ascending).
using UserIndex = std::map<int, std::vector<Interaction>>;
UserIndex build_user_index(const InteractionLog& log);

struct ItemCatalog {
  int n_groups = 0;
  std::vector<int> items;  // sorted item ids
  std::unordered_map<int, int> group_of;
  Vec weights;  // length n_groups, strictly positive

  int group(int item_id) const;
  std::vector<std::vector<int>> items_by_group() const;
};

// Tab-separated "user item rating timestamp" rows (MovieLens u.data layout).
InteractionLog parse_interactions(const std::string& path,
                                  int rating_threshold = 3);

// Assigns each item a group drawn from a geometric distribution with
// success probability p, renormalized over the n_groups outcomes.
// Group weights default to 1.
ItemCatalog assign_groups(const std::vector<int>& items, int n_groups,
                          double p, std::uint64_t seed);

// Renormalized geometric mass function over n_groups outcomes.
Vec geometric_group_probs(int n_groups, double p);

struct UserSplit {
  std::vector<int> train_users;
  std::vector<int> valid_users;
  std::vector<int> test_users;
};

// Disjoint user partition; sizes floor(n*valid), floor(n*test), remainder
// to train. Whole users move together so their sequences stay intact.
UserSplit split_users(const InteractionLog& log,
                      const std::array<double, 3>& ratios, std::uint64_t seed);

void write_catalog_csv(const std::string& path, const ItemCatalog& catalog);
ItemCatalog read_catalog_csv(const std::string& path, int n_groups = 0);
void write_split_csv(const std::string& path, const UserSplit& split);
UserSplit read_split_csv(const std::string& path);
void write_interactions_tsv(const std::string& path,
                            const InteractionLog& log);

// Synthetic stand-in for the MovieLens log when the real file is absent:
// low-rank user/item taste structure, popularity-skewed item exposure,
// integer ratings 1..5.
struct SyntheticConfig {
  int n_users = 200;
  int n_items = 400;
  int ratings_per_user = 60;
  int latent_dim = 8;
  std::uint64_t seed = 1;
};

InteractionLog make_synthetic_log(const SyntheticConfig& cfg);

// Keeps only the `n_users` users chosen by a seeded draw (all their records).
InteractionLog subset_users(const InteractionLog& log, int n_users,
                            std::uint64_t seed);

}  // namespace fairrec
