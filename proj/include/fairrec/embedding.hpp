#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairrec/dataset.hpp"
#include "fairrec/nn.hpp"

namespace fairrec {

// Pretrained latent vectors. combined holds eps_a = e_a + e_g, the item
// embedding shifted by its group mean.
struct EmbeddingTable {
  int dim = 0;
  std::map<int, Vec> user_vecs;
  std::map<int, Vec> item_vecs;
  std::vector<Vec> group_vecs;
  std::map<int, Vec> combined;

  const Vec& user_vec(int user_id) const;
  const Vec& item_vec(int item_id) const;
  const Vec& combined_vec(int item_id) const;
  bool has_user(int user_id) const { return user_vecs.count(user_id) != 0; }

  double mean_item_norm() const;
};

struct MfConfig {
  int dim = 50;
  double lr = 0.01;
  double reg = 0.01;
  int epochs = 30;
  double lr_decay = 0.9;
  std::uint64_t seed = 0;
};

struct MfTrainResult {
  EmbeddingTable table;
  Vec epoch_loss;  // full objective after each epoch
};

// SGD on sum over ratings of (r - p.q)^2 + reg*(|p|^2 + |q|^2). Only the
// given users contribute ratings; item vectors exist for every item in the
// log so held-out items still have embeddings.
MfTrainResult train_mf(const InteractionLog& log,
                       const std::vector<int>& train_users,
                       const MfConfig& cfg);

// Per-sample objective (r - p.q)^2 + reg*(|p|^2 + |q|^2) and its gradients;
// this is exactly the quantity the SGD loop steps on.
struct MfSampleGrad {
  double loss = 0.0;
  Vec gp;
  Vec gq;
};
MfSampleGrad mf_sample_gradient(const Vec& p, const Vec& q, double rating,
                                double reg);

// Fills group_vecs with within-group means of item vectors and populates
// combined. Every group must contain at least one item.
void compute_group_embeddings(EmbeddingTable& table,
                              const ItemCatalog& catalog);

// p_u . e_a
double predict_score(const EmbeddingTable& table, int user_id, int item_id);

// CSV "kind,id,v0,...,v{d-1}" with kind in {user,item,group}.
void write_embeddings_csv(const std::string& path,
                          const EmbeddingTable& table);
EmbeddingTable read_embeddings_csv(const std::string& path);

}  // namespace fairrec
