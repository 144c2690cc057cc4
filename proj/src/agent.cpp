#include "fairrec/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "fairrec/rng.hpp"

namespace fairrec {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  data_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[write_] = std::move(t);
  }
  write_ = (write_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(
    std::size_t batch, std::mt19937_64& rng) const {
  if (batch > data_.size()) {
    throw std::invalid_argument("ReplayBuffer: batch larger than buffer");
  }
  // Floyd's sampling: `batch` distinct indices in [0, size).
  std::unordered_set<std::size_t> chosen;
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t j = data_.size() - batch; j < data_.size(); ++j) {
    const std::size_t t = static_cast<std::size_t>(
        uniform_below(rng, static_cast<int>(j) + 1));
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(
    std::size_t batch, std::mt19937_64& rng) const {
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (std::size_t i : sample_indices(batch, rng)) out.push_back(&data_[i]);
  return out;
}

FairRecAgent::FairRecAgent(AgentConfig cfg, const EmbeddingTable* table)
    : cfg_(cfg), table_(table) {
  if (table == nullptr) throw std::invalid_argument("FairRecAgent: null table");
  if (table->dim != cfg.dim) {
    throw std::invalid_argument("FairRecAgent: table dim != config dim");
  }
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x6167656e));  // "agen"
  const int nd = cfg.history_len * cfg.dim;
  if (cfg_.state_mode == StateMode::full) {
    online_.attn_hidden = DenseLayer(cfg.attn_hidden, nd, rng);
    online_.attn_out = DenseLayer(cfg.history_len, cfg.attn_hidden, rng);
    online_.fs_hidden = DenseLayer(cfg.fs_hidden, cfg.n_groups, rng);
    online_.fs_out = DenseLayer(cfg.fs_out, cfg.fs_hidden, rng);
  }
  const int hdim = cfg_.state_dim();
  online_.actor1 = DenseLayer(cfg.hidden_width, hdim, rng);
  online_.actor2 = DenseLayer(cfg.hidden_width, cfg.hidden_width, rng);
  online_.actor3 = DenseLayer(cfg.dim, cfg.hidden_width, rng);
  online_.critic_proj = DenseLayer(cfg.dim, hdim, rng);
  online_.critic1 = DenseLayer(cfg.hidden_width, 2 * cfg.dim, rng);
  online_.critic2 = DenseLayer(cfg.hidden_width, cfg.hidden_width, rng);
  online_.critic3 = DenseLayer(1, cfg.hidden_width, rng);
  target_ = online_;
}

StateEncoding FairRecAgent::encode_with(const Nets& nets,
                                        const UserState& s) const {
  const int n = cfg_.history_len;
  const int d = cfg_.dim;
  if (static_cast<int>(s.history.size()) != n) {
    throw std::invalid_argument("encode_state: history must have length N");
  }
  StateEncoding enc;
  if (cfg_.state_mode == StateMode::plain_concat) {
    enc.h.assign(static_cast<std::size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i) {
      const int item = s.history[static_cast<std::size_t>(i)];
      if (item == kSentinelItem) continue;
      const Vec& e = table_->item_vec(item);
      std::copy(e.begin(), e.end(), enc.h.begin() + static_cast<std::ptrdiff_t>(i) * d);
    }
    enc.m = enc.h;
    return enc;
  }

  enc.eps_flat.assign(static_cast<std::size_t>(n) * d, 0.0);
  enc.masked.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int item = s.history[static_cast<std::size_t>(i)];
    if (item == kSentinelItem) {
      enc.masked[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    const Vec& eps = table_->combined_vec(item);
    std::copy(eps.begin(), eps.end(),
              enc.eps_flat.begin() + static_cast<std::ptrdiff_t>(i) * d);
  }

  enc.attn_pre = nets.attn_hidden.forward(enc.eps_flat);
  enc.attn_act = relu(enc.attn_pre);
  enc.logits = nets.attn_out.forward(enc.attn_act);
  enc.beta = masked_softmax(enc.logits, enc.masked);

  enc.m.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const double bi = enc.beta[static_cast<std::size_t>(i)];
    for (int k = 0; k < d; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + k;
      enc.m[idx] = bi * enc.eps_flat[idx];
    }
  }

  if (static_cast<int>(s.alloc_x.size()) != cfg_.n_groups) {
    throw std::invalid_argument("encode_state: allocation length != n_groups");
  }
  enc.fs_pre = nets.fs_hidden.forward(s.alloc_x);
  enc.fs_act = relu(enc.fs_pre);
  enc.n = nets.fs_out.forward(enc.fs_act);

  enc.h.reserve(enc.m.size() + enc.n.size());
  enc.h = enc.m;
  enc.h.insert(enc.h.end(), enc.n.begin(), enc.n.end());
  return enc;
}

StateEncoding FairRecAgent::encode_state(const UserState& s) const {
  return encode_with(online_, s);
}

StateEncoding FairRecAgent::encode_state_target(const UserState& s) const {
  return encode_with(target_, s);
}

FairRecAgent::ActorTrace FairRecAgent::actor_trace_with(const Nets& nets,
                                                        const Vec& h) const {
  ActorTrace t;
  t.h = h;
  t.pre1 = nets.actor1.forward(h);
  t.act1 = relu(t.pre1);
  t.pre2 = nets.actor2.forward(t.act1);
  t.act2 = relu(t.pre2);
  t.z = nets.actor3.forward(t.act2);
  return t;
}

Vec FairRecAgent::actor_forward(const Vec& h) const {
  return actor_trace_with(online_, h).z;
}

FairRecAgent::CriticTrace FairRecAgent::critic_trace_with(const Nets& nets,
                                                          const Vec& h,
                                                          const Vec& z) const {
  CriticTrace t;
  t.h = h;
  t.z = z;
  t.proj_pre = nets.critic_proj.forward(h);
  t.proj = relu(t.proj_pre);
  t.cat = t.proj;
  t.cat.insert(t.cat.end(), z.begin(), z.end());
  t.pre1 = nets.critic1.forward(t.cat);
  t.act1 = relu(t.pre1);
  t.pre2 = nets.critic2.forward(t.act1);
  t.act2 = relu(t.pre2);
  t.q = nets.critic3.forward(t.act2)[0];
  return t;
}

double FairRecAgent::critic_forward(const Vec& h, const Vec& z) const {
  return critic_trace_with(online_, h, z).q;
}

int FairRecAgent::select_action(const Vec& z,
                                const std::vector<int>& candidates) const {
  if (candidates.empty()) {
    throw std::runtime_error("select_action: candidate pool exhausted");
  }
  int best_item = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (int item : candidates) {
    const double score = dot(table_->item_vec(item), z);
    if (first || score > best_score ||
        (score == best_score && item < best_item)) {
      best_item = item;
      best_score = score;
      first = false;
    }
  }
  return best_item;
}

Vec FairRecAgent::explore(const Vec& z, double sigma,
                          std::mt19937_64& rng) const {
  if (sigma < 0.0) throw std::invalid_argument("explore: sigma must be >= 0");
  if (sigma == 0.0) return z;
  Vec out(z);
  for (auto& v : out) v += sigma * normal01(rng);
  return out;
}

double FairRecAgent::td_target(const Transition& t) const {
  if (t.done) return t.reward;
  const StateEncoding enc = encode_with(target_, t.next_state);
  const ActorTrace pi = actor_trace_with(target_, enc.h);
  const CriticTrace q = critic_trace_with(target_, enc.h, pi.z);
  return t.reward + cfg_.gamma * q.q;
}

std::vector<double> FairRecAgent::td_targets(
    const std::vector<const Transition*>& batch) const {
  std::vector<double> nus;
  nus.reserve(batch.size());
  for (const Transition* t : batch) nus.push_back(td_target(*t));
  return nus;
}

Vec FairRecAgent::critic_backward(const CriticTrace& t, double upstream) {
  const Vec gout{upstream};
  const Vec gact2 = online_.critic3.backward(t.act2, gout);
  const Vec gpre2 = relu_backward(t.pre2, gact2);
  const Vec gact1 = online_.critic2.backward(t.act1, gpre2);
  const Vec gpre1 = relu_backward(t.pre1, gact1);
  const Vec gcat = online_.critic1.backward(t.cat, gpre1);
  const Vec gproj(gcat.begin(), gcat.begin() + cfg_.dim);
  const Vec gproj_pre = relu_backward(t.proj_pre, gproj);
  return online_.critic_proj.backward(t.h, gproj_pre);
}

std::pair<Vec, Vec> FairRecAgent::critic_input_grads(
    const CriticTrace& t) const {
  const Vec gout{1.0};
  const Vec gact2 = online_.critic3.input_grad(gout);
  const Vec gpre2 = relu_backward(t.pre2, gact2);
  const Vec gact1 = online_.critic2.input_grad(gpre2);
  const Vec gpre1 = relu_backward(t.pre1, gact1);
  const Vec gcat = online_.critic1.input_grad(gpre1);
  const Vec gproj(gcat.begin(), gcat.begin() + cfg_.dim);
  Vec gz(gcat.begin() + cfg_.dim, gcat.end());
  const Vec gproj_pre = relu_backward(t.proj_pre, gproj);
  Vec gh = online_.critic_proj.input_grad(gproj_pre);
  return {std::move(gh), std::move(gz)};
}

void FairRecAgent::encoder_backward(const StateEncoding& enc,
                                    const UserState& s, const Vec& gh) {
  if (cfg_.state_mode != StateMode::full) return;  // no encoder parameters
  const int n = cfg_.history_len;
  const int d = cfg_.dim;
  const std::size_t nd = static_cast<std::size_t>(n) * d;

  // Fairness branch.
  const Vec gn(gh.begin() + static_cast<std::ptrdiff_t>(nd), gh.end());
  const Vec gfs_act = online_.fs_out.backward(enc.fs_act, gn);
  const Vec gfs_pre = relu_backward(enc.fs_pre, gfs_act);
  online_.fs_hidden.backward(s.alloc_x, gfs_pre);

  // Attention branch: m_i = beta_i * eps_i; embeddings are frozen, so only
  // the beta path carries parameter gradients.
  Vec gbeta(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + k;
      acc += gh[idx] * enc.eps_flat[idx];
    }
    gbeta[static_cast<std::size_t>(i)] = acc;
  }
  Vec glogits = softmax_backward(enc.beta, gbeta);
  for (int i = 0; i < n; ++i) {
    if (enc.masked[static_cast<std::size_t>(i)]) {
      glogits[static_cast<std::size_t>(i)] = 0.0;
    }
  }
  const Vec gattn_act = online_.attn_out.backward(enc.attn_act, glogits);
  const Vec gattn_pre = relu_backward(enc.attn_pre, gattn_act);
  online_.attn_hidden.backward(enc.eps_flat, gattn_pre);
}

void FairRecAgent::actor_backward(const ActorTrace& t, const Vec& upstream) {
  const Vec gact2 = online_.actor3.backward(t.act2, upstream);
  const Vec gpre2 = relu_backward(t.pre2, gact2);
  const Vec gact1 = online_.actor2.backward(t.act1, gpre2);
  const Vec gpre1 = relu_backward(t.pre1, gact1);
  online_.actor1.backward(t.h, gpre1);  // h is input; encoder not trained here
}

double FairRecAgent::critic_loss_and_grads(
    const std::vector<const Transition*>& batch,
    const std::vector<double>& nus) {
  if (batch.empty()) {
    throw std::invalid_argument("update_critic: empty batch");
  }
  if (batch.size() != nus.size()) {
    throw std::invalid_argument("critic_loss_and_grads: size mismatch");
  }
  for (DenseLayer* l : critic_group()) l->zero_grad();
  for (DenseLayer* l : encoder_group()) l->zero_grad();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  double q_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    const StateEncoding enc = encode_with(online_, t.state);
    const CriticTrace trace = critic_trace_with(online_, enc.h, t.z);
    const double err = trace.q - nus[i];
    loss += err * err * inv_b;
    q_sum += trace.q;
    const Vec gh = critic_backward(trace, 2.0 * err * inv_b);
    encoder_backward(enc, t.state, gh);
  }
  last_mean_q_ = q_sum * inv_b;
  return loss;
}

double FairRecAgent::critic_loss_only(
    const std::vector<const Transition*>& batch,
    const std::vector<double>& nus) const {
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    const StateEncoding enc = encode_with(online_, t.state);
    const double q = critic_trace_with(online_, enc.h, t.z).q;
    const double err = q - nus[i];
    loss += err * err * inv_b;
  }
  return loss;
}

double FairRecAgent::update_critic(
    const std::vector<const Transition*>& batch) {
  const std::vector<double> nus = td_targets(batch);
  const double loss = critic_loss_and_grads(batch, nus);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("update_critic: loss diverged");
  }
  for (DenseLayer* l : critic_group()) l->apply_adam(cfg_.critic_opt);
  for (DenseLayer* l : encoder_group()) l->apply_adam(cfg_.critic_opt);
  rounds_ += 1;
  if (cfg_.sync_every > 0 && rounds_ % cfg_.sync_every == 0) sync_targets();
  return loss;
}

double FairRecAgent::actor_objective(
    const std::vector<const Transition*>& batch) const {
  double q_sum = 0.0;
  for (const Transition* t : batch) {
    const StateEncoding enc = encode_with(online_, t->state);
    const ActorTrace pi = actor_trace_with(online_, enc.h);
    q_sum += critic_trace_with(online_, enc.h, pi.z).q;
  }
  return q_sum / static_cast<double>(batch.size());
}

void FairRecAgent::actor_accumulate_grads(
    const std::vector<const Transition*>& batch) {
  if (batch.empty()) {
    throw std::invalid_argument("update_actor: empty batch");
  }
  for (DenseLayer* l : actor_group()) l->zero_grad();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Transition* t : batch) {
    const StateEncoding enc = encode_with(online_, t->state);
    const ActorTrace pi = actor_trace_with(online_, enc.h);
    const CriticTrace q = critic_trace_with(online_, enc.h, pi.z);
    auto [gh, gz] = critic_input_grads(q);
    (void)gh;
    // Minimize -J: upstream is -dQ/dz averaged over the batch.
    for (auto& v : gz) v *= -inv_b;
    actor_backward(pi, gz);
  }
}

void FairRecAgent::update_actor(const std::vector<const Transition*>& batch) {
  actor_accumulate_grads(batch);
  for (DenseLayer* l : actor_group()) l->apply_adam(cfg_.actor_opt);
}

void FairRecAgent::sync_targets() {
  auto copy_net = [](Nets& dst, const Nets& src, bool full_mode) {
    if (full_mode) {
      dst.attn_hidden.copy_values_from(src.attn_hidden);
      dst.attn_out.copy_values_from(src.attn_out);
      dst.fs_hidden.copy_values_from(src.fs_hidden);
      dst.fs_out.copy_values_from(src.fs_out);
    }
    dst.actor1.copy_values_from(src.actor1);
    dst.actor2.copy_values_from(src.actor2);
    dst.actor3.copy_values_from(src.actor3);
    dst.critic_proj.copy_values_from(src.critic_proj);
    dst.critic1.copy_values_from(src.critic1);
    dst.critic2.copy_values_from(src.critic2);
    dst.critic3.copy_values_from(src.critic3);
  };
  copy_net(target_, online_, cfg_.state_mode == StateMode::full);
  syncs_ += 1;
}

std::vector<DenseLayer*> FairRecAgent::critic_group() {
  return {&online_.critic_proj, &online_.critic1, &online_.critic2,
          &online_.critic3};
}

std::vector<DenseLayer*> FairRecAgent::encoder_group() {
  if (cfg_.state_mode != StateMode::full) return {};
  return {&online_.attn_hidden, &online_.attn_out, &online_.fs_hidden,
          &online_.fs_out};
}

std::vector<DenseLayer*> FairRecAgent::actor_group() {
  return {&online_.actor1, &online_.actor2, &online_.actor3};
}

std::vector<TensorRef> FairRecAgent::refs_of(
    std::vector<DenseLayer*> layers, const std::vector<std::string>& names) {
  std::vector<TensorRef> refs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    DenseLayer* l = layers[i];
    refs.push_back({names[i] + ".w", std::span<double>(l->w.data),
                    std::span<double>(l->gw.data)});
    refs.push_back({names[i] + ".b", std::span<double>(l->b),
                    std::span<double>(l->gb)});
  }
  return refs;
}

std::vector<TensorRef> FairRecAgent::encoder_tensors() {
  if (cfg_.state_mode != StateMode::full) return {};
  return refs_of(encoder_group(), {"attn_hidden", "attn_out", "fs_hidden",
                                   "fs_out"});
}

std::vector<TensorRef> FairRecAgent::actor_tensors() {
  return refs_of(actor_group(), {"actor1", "actor2", "actor3"});
}

std::vector<TensorRef> FairRecAgent::critic_tensors() {
  return refs_of(critic_group(), {"critic_proj", "critic1", "critic2",
                                  "critic3"});
}

std::vector<TensorRef> FairRecAgent::trainable_tensors() {
  std::vector<TensorRef> refs = encoder_tensors();
  for (auto& r : actor_tensors()) refs.push_back(r);
  for (auto& r : critic_tensors()) refs.push_back(r);
  return refs;
}

void FairRecAgent::save_checkpoint(const std::string& path) const {
  std::vector<NamedTensor> tensors;
  auto add = [&](const std::string& prefix, const Nets& nets) {
    auto add_layer = [&](const std::string& name, const DenseLayer& l) {
      tensors.push_back({prefix + name + ".w",
                         {static_cast<std::uint64_t>(l.w.rows),
                          static_cast<std::uint64_t>(l.w.cols)},
                         l.w.data});
      tensors.push_back(
          {prefix + name + ".b", {static_cast<std::uint64_t>(l.b.size())}, l.b});
    };
    if (cfg_.state_mode == StateMode::full) {
      add_layer("attn_hidden", nets.attn_hidden);
      add_layer("attn_out", nets.attn_out);
      add_layer("fs_hidden", nets.fs_hidden);
      add_layer("fs_out", nets.fs_out);
    }
    add_layer("actor1", nets.actor1);
    add_layer("actor2", nets.actor2);
    add_layer("actor3", nets.actor3);
    add_layer("critic_proj", nets.critic_proj);
    add_layer("critic1", nets.critic1);
    add_layer("critic2", nets.critic2);
    add_layer("critic3", nets.critic3);
  };
  add("", online_);
  add("target.", target_);
  save_tensors(path, tensors);
}

void FairRecAgent::load_checkpoint(const std::string& path) {
  const std::vector<NamedTensor> tensors = load_tensors(path);
  auto find = [&](const std::string& name) -> const NamedTensor& {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw std::runtime_error("checkpoint: missing tensor " + name);
  };
  auto load_into = [&](const std::string& prefix, Nets& nets) {
    auto load_layer = [&](const std::string& name, DenseLayer& l) {
      const NamedTensor& tw = find(prefix + name + ".w");
      if (tw.dims.size() != 2 ||
          tw.dims[0] != static_cast<std::uint64_t>(l.w.rows) ||
          tw.dims[1] != static_cast<std::uint64_t>(l.w.cols)) {
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      }
      l.w.data = tw.data;
      const NamedTensor& tb = find(prefix + name + ".b");
      if (tb.data.size() != l.b.size()) {
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      }
      l.b = tb.data;
    };
    if (cfg_.state_mode == StateMode::full) {
      load_layer("attn_hidden", nets.attn_hidden);
      load_layer("attn_out", nets.attn_out);
      load_layer("fs_hidden", nets.fs_hidden);
      load_layer("fs_out", nets.fs_out);
    }
    load_layer("actor1", nets.actor1);
    load_layer("actor2", nets.actor2);
    load_layer("actor3", nets.actor3);
    load_layer("critic_proj", nets.critic_proj);
    load_layer("critic1", nets.critic1);
    load_layer("critic2", nets.critic2);
    load_layer("critic3", nets.critic3);
  };
  load_into("", online_);
  load_into("target.", target_);
}

double FairRecAgent::relu_margin(const UserState& s, const Vec& z) const {
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&](const Vec& pre) {
    for (double v : pre) margin = std::min(margin, std::abs(v));
  };
  const StateEncoding enc = encode_with(online_, s);
  if (cfg_.state_mode == StateMode::full) {
    scan(enc.attn_pre);
    scan(enc.fs_pre);
  }
  const ActorTrace pi = actor_trace_with(online_, enc.h);
  scan(pi.pre1);
  scan(pi.pre2);
  for (const Vec* zz : {&z, &pi.z}) {
    const CriticTrace q = critic_trace_with(online_, enc.h, *zz);
    scan(q.proj_pre);
    scan(q.pre1);
    scan(q.pre2);
  }
  return margin;
}

}  // namespace fairrec
