#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fairrec/embedding.hpp"
#include "fairrec/fairness.hpp"
#include "fairrec/nn.hpp"

namespace fairrec {

// Placeholder for history slots of users with fewer than N positive
// interactions; encodes to the zero vector and is masked out of attention.
inline constexpr int kSentinelItem = -1;

struct UserState {
  std::vector<int> history;  // exactly N ids, oldest first, sentinel padded
  Vec alloc_x;               // allocation snapshot, length l
};

enum class StateMode {
  full,          // attention over item+group embeddings plus fairness MLP
  plain_concat,  // concatenated raw item embeddings, no fairness input
};

struct AgentConfig {
  int dim = 50;         // embedding dimension d
  int history_len = 5;  // N
  int n_groups = 10;    // l
  int attn_hidden = 64;
  int fs_hidden = 32;
  int fs_out = 16;
  int hidden_width = 1000;  // actor/critic hidden layers
  double gamma = 0.9;
  AdamParams actor_opt{0.001, 0.9, 0.999, 1e-8};
  AdamParams critic_opt{0.001, 0.9, 0.999, 1e-8};
  int sync_every = 100;  // hard target copy cadence, in update rounds
  StateMode state_mode = StateMode::full;
  std::uint64_t seed = 0;

  int state_dim() const {
    const int nd = history_len * dim;
    return state_mode == StateMode::full ? nd + fs_out : nd;
  }
};

// Encoded state plus the caches the backward pass needs.
struct StateEncoding {
  Vec h;     // [m || n]
  Vec m;     // attention-weighted item slots, length N*d
  Vec n;     // fairness representation (empty in plain_concat mode)
  Vec beta;  // attention weights on the simplex

  Vec eps_flat;  // concatenated eps_a inputs
  Vec attn_pre;
  Vec attn_act;
  Vec logits;
  Vec fs_pre;
  Vec fs_act;
  std::vector<char> masked;
};

struct Transition {
  UserState state;
  Vec z;  // ranking vector actually used (post-noise)
  double reward = 0.0;
  UserState next_state;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  // Distinct slots, uniform without replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch,
                                          std::mt19937_64& rng) const;
  std::vector<const Transition*> sample(std::size_t batch,
                                        std::mt19937_64& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t capacity_;
  std::size_t write_ = 0;
};

struct TensorRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

// The FairRec actor-critic: state encoder (attention over item+group
// embeddings plus a fairness-allocation MLP), deterministic actor producing
// a ranking vector z, critic Q(h, z), frozen target copies, and the update
// rules. Embeddings stay fixed; the critic loss trains the encoder.
class FairRecAgent {
 public:
  FairRecAgent(AgentConfig cfg, const EmbeddingTable* table);

  const AgentConfig& config() const { return cfg_; }
  const EmbeddingTable& table() const { return *table_; }

  StateEncoding encode_state(const UserState& s) const;
  StateEncoding encode_state_target(const UserState& s) const;

  Vec actor_forward(const Vec& h) const;
  double critic_forward(const Vec& h, const Vec& z) const;

  // argmax over candidates of e_a . z, ties to the smallest item id.
  int select_action(const Vec& z, const std::vector<int>& candidates) const;

  Vec explore(const Vec& z, double sigma, std::mt19937_64& rng) const;

  // r if done, else r + gamma * Q'(h', pi'(h')) using target parameters only.
  double td_target(const Transition& t) const;

  // One Adam step on the critic (projection + MLP) and, in full state mode,
  // the encoder. Returns the pre-update mean squared TD error.
  double update_critic(const std::vector<const Transition*>& batch);

  // One Adam step ascending the sampled deterministic policy gradient.
  // Critic and encoder parameters are left untouched.
  void update_actor(const std::vector<const Transition*>& batch);

  void sync_targets();
  long long update_rounds() const { return rounds_; }
  long long sync_count() const { return syncs_; }
  double last_mean_q() const { return last_mean_q_; }

  // Test/verification hooks: loss at fixed TD targets, with and without
  // gradient accumulation, and the actor objective (mean Q at pi(h)).
  std::vector<double> td_targets(const std::vector<const Transition*>& batch) const;
  double critic_loss_and_grads(const std::vector<const Transition*>& batch,
                               const std::vector<double>& nus);
  double critic_loss_only(const std::vector<const Transition*>& batch,
                          const std::vector<double>& nus) const;
  double actor_objective(const std::vector<const Transition*>& batch) const;
  void actor_accumulate_grads(const std::vector<const Transition*>& batch);

  // Trainable tensors: encoder + actor + critic (online copies).
  std::vector<TensorRef> trainable_tensors();
  std::vector<TensorRef> encoder_tensors();
  std::vector<TensorRef> actor_tensors();
  std::vector<TensorRef> critic_tensors();

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  // Largest |pre-activation| margin violation across ReLU units for the
  // encoder+critic path at (s, z); used to reject finite-difference probes
  // that sit on a kink.
  double relu_margin(const UserState& s, const Vec& z) const;

 private:
  struct Nets {
    DenseLayer attn_hidden;  // N*d -> attn_hidden
    DenseLayer attn_out;     // attn_hidden -> N
    DenseLayer fs_hidden;    // l -> fs_hidden
    DenseLayer fs_out;       // fs_hidden -> fs_out
    DenseLayer actor1, actor2, actor3;
    DenseLayer critic_proj;  // h -> d
    DenseLayer critic1, critic2, critic3;
  };

  struct ActorTrace {
    Vec h, pre1, act1, pre2, act2, z;
  };
  struct CriticTrace {
    Vec h, z, proj_pre, proj, cat, pre1, act1, pre2, act2;
    double q = 0.0;
  };

  StateEncoding encode_with(const Nets& nets, const UserState& s) const;
  ActorTrace actor_trace_with(const Nets& nets, const Vec& h) const;
  CriticTrace critic_trace_with(const Nets& nets, const Vec& h,
                                const Vec& z) const;
  // Backward through the critic, accumulating parameter gradients; returns
  // dL/dh.
  Vec critic_backward(const CriticTrace& t, double upstream);
  // Input gradients only (dQ/dh, dQ/dz); parameters untouched.
  std::pair<Vec, Vec> critic_input_grads(const CriticTrace& t) const;
  void encoder_backward(const StateEncoding& enc, const UserState& s,
                        const Vec& gh);
  void actor_backward(const ActorTrace& t, const Vec& upstream);

  std::vector<TensorRef> refs_of(std::vector<DenseLayer*> layers,
                                 const std::vector<std::string>& names);
  std::vector<DenseLayer*> critic_group();
  std::vector<DenseLayer*> encoder_group();
  std::vector<DenseLayer*> actor_group();

  AgentConfig cfg_;
  const EmbeddingTable* table_;
  Nets online_;
  Nets target_;
  long long rounds_ = 0;
  long long syncs_ = 0;
  double last_mean_q_ = 0.0;
};

}  // namespace fairrec
