#include "fairrec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fairrec/rng.hpp"

namespace fairrec {

namespace {

const Vec& lookup(const std::map<int, Vec>& m, int id, const char* what) {
  auto it = m.find(id);
  if (it == m.end()) {
    throw std::out_of_range(std::string("EmbeddingTable: unknown ") + what +
                            " " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

const Vec& EmbeddingTable::user_vec(int user_id) const {
  return lookup(user_vecs, user_id, "user");
}

const Vec& EmbeddingTable::item_vec(int item_id) const {
  return lookup(item_vecs, item_id, "item");
}

const Vec& EmbeddingTable::combined_vec(int item_id) const {
  return lookup(combined, item_id, "combined item");
}

double EmbeddingTable::mean_item_norm() const {
  if (item_vecs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [id, v] : item_vecs) s += std::sqrt(dot(v, v));
  return s / static_cast<double>(item_vecs.size());
}

MfSampleGrad mf_sample_gradient(const Vec& p, const Vec& q, double rating,
                                double reg) {
  MfSampleGrad out;
  const double err = rating - dot(p, q);
  out.loss = err * err + reg * (dot(p, p) + dot(q, q));
  out.gp.resize(p.size());
  out.gq.resize(q.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    out.gp[k] = -2.0 * err * q[k] + 2.0 * reg * p[k];
    out.gq[k] = -2.0 * err * p[k] + 2.0 * reg * q[k];
  }
  return out;
}

MfTrainResult train_mf(const InteractionLog& log,
                       const std::vector<int>& train_users,
                       const MfConfig& cfg) {
  if (log.records.empty()) throw std::invalid_argument("train_mf: empty log");
  if (cfg.dim < 1) throw std::invalid_argument("train_mf: dim must be >= 1");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train_mf: lr must be > 0");
  if (cfg.reg < 0.0) throw std::invalid_argument("train_mf: reg must be >= 0");

  std::unordered_set<int> allowed(train_users.begin(), train_users.end());
  std::vector<std::size_t> sample_idx;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (allowed.count(log.records[i].user_id)) sample_idx.push_back(i);
  }
  if (sample_idx.empty()) {
    throw std::invalid_argument("train_mf: no ratings from the given users");
  }

  MfTrainResult result;
  EmbeddingTable& table = result.table;
  table.dim = cfg.dim;

  std::mt19937_64 rng(mix_seed(cfg.seed, 0x6d666974));  // "mfit"
  auto init_vec = [&](Vec& v) {
    v.resize(static_cast<std::size_t>(cfg.dim));
    for (auto& x : v) x = uniform_range(rng, -0.05, 0.05);
  };
  for (int item : log.item_ids()) init_vec(table.item_vecs[item]);
  std::vector<int> sorted_users(train_users);
  std::sort(sorted_users.begin(), sorted_users.end());
  for (int user : sorted_users) init_vec(table.user_vecs[user]);

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x6d667368));  // "mfsh"
  double lr = cfg.lr;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    fisher_yates(sample_idx, shuffle_rng);
    for (std::size_t idx : sample_idx) {
      const auto& rec = log.records[idx];
      Vec& p = table.user_vecs[rec.user_id];
      Vec& q = table.item_vecs[rec.item_id];
      const double err = rec.rating - dot(p, q);
      for (int k = 0; k < cfg.dim; ++k) {
        const double pk = p[static_cast<std::size_t>(k)];
        const double qk = q[static_cast<std::size_t>(k)];
        p[static_cast<std::size_t>(k)] += lr * (err * qk - cfg.reg * pk);
        q[static_cast<std::size_t>(k)] += lr * (err * pk - cfg.reg * qk);
      }
    }
    double loss = 0.0;
    for (std::size_t idx : sample_idx) {
      const auto& rec = log.records[idx];
      const Vec& p = table.user_vecs[rec.user_id];
      const Vec& q = table.item_vecs[rec.item_id];
      const double err = rec.rating - dot(p, q);
      loss += err * err + cfg.reg * (dot(p, p) + dot(q, q));
    }
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train_mf: loss diverged at epoch " +
                               std::to_string(epoch + 1));
    }
    result.epoch_loss.push_back(loss);
    lr *= cfg.lr_decay;
  }
  return result;
}

void compute_group_embeddings(EmbeddingTable& table,
                              const ItemCatalog& catalog) {
  table.group_vecs.assign(static_cast<std::size_t>(catalog.n_groups),
                          Vec(static_cast<std::size_t>(table.dim), 0.0));
  std::vector<int> counts(static_cast<std::size_t>(catalog.n_groups), 0);
  for (const auto& [item, vec] : table.item_vecs) {
    auto it = catalog.group_of.find(item);
    if (it == catalog.group_of.end()) continue;
    Vec& g = table.group_vecs[static_cast<std::size_t>(it->second)];
    for (int k = 0; k < table.dim; ++k) g[static_cast<std::size_t>(k)] += vec[static_cast<std::size_t>(k)];
    counts[static_cast<std::size_t>(it->second)] += 1;
  }
  for (int g = 0; g < catalog.n_groups; ++g) {
    if (counts[static_cast<std::size_t>(g)] == 0) {
      throw std::runtime_error("compute_group_embeddings: group " +
                               std::to_string(g) + " has no items");
    }
    for (auto& v : table.group_vecs[static_cast<std::size_t>(g)]) {
      v /= counts[static_cast<std::size_t>(g)];
    }
  }
  table.combined.clear();
  for (const auto& [item, vec] : table.item_vecs) {
    auto it = catalog.group_of.find(item);
    if (it == catalog.group_of.end()) continue;
    Vec c(vec);
    const Vec& g = table.group_vecs[static_cast<std::size_t>(it->second)];
    for (int k = 0; k < table.dim; ++k) c[static_cast<std::size_t>(k)] += g[static_cast<std::size_t>(k)];
    table.combined[item] = std::move(c);
  }
}

double predict_score(const EmbeddingTable& table, int user_id, int item_id) {
  return dot(table.user_vec(user_id), table.item_vec(item_id));
}

namespace {

void write_row(std::ofstream& out, const char* kind, int id, const Vec& v) {
  out << kind << ',' << id;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << ',' << buf;
  }
  out << "\n";
}

}  // namespace

void write_embeddings_csv(const std::string& path,
                          const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "kind,id";
  for (int k = 0; k < table.dim; ++k) out << ",v" << k;
  out << "\n";
  for (const auto& [id, v] : table.user_vecs) write_row(out, "user", id, v);
  for (const auto& [id, v] : table.item_vecs) write_row(out, "item", id, v);
  for (std::size_t g = 0; g < table.group_vecs.size(); ++g) {
    write_row(out, "group", static_cast<int>(g), table.group_vecs[g]);
  }
}

EmbeddingTable read_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  EmbeddingTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty embeddings file " + path);
  }
  std::vector<std::pair<int, Vec>> groups;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string kind, field;
    if (!std::getline(ss, kind, ',')) continue;
    if (!std::getline(ss, field, ',')) {
      throw std::runtime_error("embeddings parse error at line " +
                               std::to_string(line_no));
    }
    const int id = std::stoi(field);
    Vec v;
    while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
    if (table.dim == 0) table.dim = static_cast<int>(v.size());
    if (static_cast<int>(v.size()) != table.dim) {
      throw std::runtime_error("embeddings dimension mismatch at line " +
                               std::to_string(line_no));
    }
    if (kind == "user") {
      table.user_vecs[id] = std::move(v);
    } else if (kind == "item") {
      table.item_vecs[id] = std::move(v);
    } else if (kind == "group") {
      groups.emplace_back(id, std::move(v));
    } else {
      throw std::runtime_error("embeddings parse error at line " +
                               std::to_string(line_no) + ": unknown kind '" +
                               kind + "'");
    }
  }
  if (!groups.empty()) {
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    table.group_vecs.resize(groups.size());
    for (auto& [id, v] : groups) {
      if (id < 0 || id >= static_cast<int>(groups.size())) {
        throw std::runtime_error("embeddings: non-contiguous group ids");
      }
      table.group_vecs[static_cast<std::size_t>(id)] = std::move(v);
    }
    // combined is derived, not persisted; callers rebuild it against a
    // catalog via compute_group_embeddings.
  }
  return table;
}

}  // namespace fairrec
