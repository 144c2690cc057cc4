#include "fairrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "fairrec/rng.hpp"

namespace fairrec {

std::vector<int> InteractionLog::user_ids() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.user_id);
  return {ids.begin(), ids.end()};
}

std::vector<int> InteractionLog::item_ids() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.item_id);
  return {ids.begin(), ids.end()};
}

UserIndex build_user_index(const InteractionLog& log) {
  UserIndex index;
  for (const auto& r : log.records) index[r.user_id].push_back(r);
  for (auto& [user, recs] : index) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.item_id < b.item_id;
    });
  }
  return index;
}

int ItemCatalog::group(int item_id) const {
  auto it = group_of.find(item_id);
  if (it == group_of.end()) {
    throw std::out_of_range("ItemCatalog: unknown item " +
                            std::to_string(item_id));
  }
  return it->second;
}

std::vector<std::vector<int>> ItemCatalog::items_by_group() const {
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(n_groups));
  for (int item : items) groups[static_cast<std::size_t>(group(item))].push_back(item);
  return groups;
}

namespace {

int parse_int_field(const std::string& field, int line_no, const char* what) {
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                             ": bad " + what + " '" + field + "'");
  }
  return value;
}

std::int64_t parse_i64_field(const std::string& field, int line_no,
                             const char* what) {
  std::int64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                             ": bad " + what + " '" + field + "'");
  }
  return value;
}

}  // namespace

InteractionLog parse_interactions(const std::string& path,
                                  int rating_threshold) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interactions file " + path);
  InteractionLog log;
  log.rating_threshold = rating_threshold;
  std::unordered_set<std::int64_t> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    int nf = 0;
    for (; nf < 4; ++nf) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields[static_cast<std::size_t>(nf)] = line.substr(start);
        ++nf;
        start = std::string::npos;
        break;
      }
      fields[static_cast<std::size_t>(nf)] = line.substr(start, tab - start);
      start = tab + 1;
    }
    if (nf != 4 || start != std::string::npos) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": expected 4 tab-separated fields");
    }
    Interaction rec;
    rec.user_id = parse_int_field(fields[0], line_no, "user id");
    rec.item_id = parse_int_field(fields[1], line_no, "item id");
    rec.rating = parse_int_field(fields[2], line_no, "rating");
    rec.timestamp = parse_i64_field(fields[3], line_no, "timestamp");
    if (rec.rating < 1 || rec.rating > 5) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": rating out of range 1..5");
    }
    const std::int64_t key =
        (static_cast<std::int64_t>(rec.user_id) << 32) ^ rec.item_id;
    if (!seen.insert(key).second) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": duplicate (user,item) pair");
    }
    rec.desired = rec.rating > rating_threshold;
    log.records.push_back(rec);
  }
  if (log.records.empty()) {
    throw std::runtime_error("interactions file " + path + " is empty");
  }
  return log;
}

Vec geometric_group_probs(int n_groups, double p) {
  if (n_groups < 2) {
    throw std::invalid_argument("geometric_group_probs: need at least 2 groups");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("geometric_group_probs: p must lie in (0,1)");
  }
  Vec probs(static_cast<std::size_t>(n_groups));
  double sum = 0.0;
  for (int g = 0; g < n_groups; ++g) {
    probs[static_cast<std::size_t>(g)] = std::pow(1.0 - p, g) * p;
    sum += probs[static_cast<std::size_t>(g)];
  }
  for (auto& v : probs) v /= sum;
  return probs;
}

ItemCatalog assign_groups(const std::vector<int>& items, int n_groups,
                          double p, std::uint64_t seed) {
  if (static_cast<int>(items.size()) < n_groups) {
    throw std::invalid_argument("assign_groups: fewer items than groups");
  }
  const Vec probs = geometric_group_probs(n_groups, p);
  Vec cdf(probs.size());
  double acc = 0.0;
  for (std::size_t g = 0; g < probs.size(); ++g) {
    acc += probs[g];
    cdf[g] = acc;
  }
  cdf.back() = 1.0;

  ItemCatalog catalog;
  catalog.n_groups = n_groups;
  catalog.items = items;
  std::sort(catalog.items.begin(), catalog.items.end());
  catalog.weights.assign(static_cast<std::size_t>(n_groups), 1.0);

  std::mt19937_64 rng(mix_seed(seed, 0x67726f75));  // "grou"
  for (int item : catalog.items) {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const int g = static_cast<int>(std::min<std::ptrdiff_t>(
        it - cdf.begin(), n_groups - 1));
    catalog.group_of[item] = g;
  }
  return catalog;
}

UserSplit split_users(const InteractionLog& log,
                      const std::array<double, 3>& ratios,
                      std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split_users: ratios must sum to 1");
  }
  std::vector<int> users = log.user_ids();
  const int n = static_cast<int>(users.size());
  if (n < 10) {
    throw std::invalid_argument("split_users: need at least 10 users");
  }
  std::mt19937_64 rng(mix_seed(seed, 0x73706c69));  // "spli"
  fisher_yates(users, rng);

  const int n_valid = static_cast<int>(std::floor(n * ratios[1]));
  const int n_test = static_cast<int>(std::floor(n * ratios[2]));
  const int n_train = n - n_valid - n_test;

  UserSplit split;
  split.train_users.assign(users.begin(), users.begin() + n_train);
  split.valid_users.assign(users.begin() + n_train,
                           users.begin() + n_train + n_valid);
  split.test_users.assign(users.begin() + n_train + n_valid, users.end());
  std::sort(split.train_users.begin(), split.train_users.end());
  std::sort(split.valid_users.begin(), split.valid_users.end());
  std::sort(split.test_users.begin(), split.test_users.end());
  return split;
}

void write_catalog_csv(const std::string& path, const ItemCatalog& catalog) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "item_id,group_id\n";
  for (int item : catalog.items) out << item << ',' << catalog.group(item) << "\n";
}

ItemCatalog read_catalog_csv(const std::string& path, int n_groups) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ItemCatalog catalog;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty catalog " + path);
  int max_group = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("catalog parse error at line " +
                               std::to_string(line_no));
    }
    const int item = parse_int_field(line.substr(0, comma), line_no, "item id");
    const int group =
        parse_int_field(line.substr(comma + 1), line_no, "group id");
    catalog.items.push_back(item);
    catalog.group_of[item] = group;
    max_group = std::max(max_group, group);
  }
  std::sort(catalog.items.begin(), catalog.items.end());
  catalog.n_groups = n_groups > 0 ? n_groups : max_group + 1;
  catalog.weights.assign(static_cast<std::size_t>(catalog.n_groups), 1.0);
  return catalog;
}

void write_split_csv(const std::string& path, const UserSplit& split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "user_id,split\n";
  for (int u : split.train_users) out << u << ",train\n";
  for (int u : split.valid_users) out << u << ",valid\n";
  for (int u : split.test_users) out << u << ",test\n";
}

UserSplit read_split_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  UserSplit split;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty split " + path);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("split parse error at line " +
                               std::to_string(line_no));
    }
    const int user = parse_int_field(line.substr(0, comma), line_no, "user id");
    const std::string kind = line.substr(comma + 1);
    if (kind == "train") {
      split.train_users.push_back(user);
    } else if (kind == "valid") {
      split.valid_users.push_back(user);
    } else if (kind == "test") {
      split.test_users.push_back(user);
    } else {
      throw std::runtime_error("split parse error at line " +
                               std::to_string(line_no) + ": unknown split '" +
                               kind + "'");
    }
  }
  return split;
}

void write_interactions_tsv(const std::string& path,
                            const InteractionLog& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& r : log.records) {
    out << r.user_id << '\t' << r.item_id << '\t' << r.rating << '\t'
        << r.timestamp << "\n";
  }
}

InteractionLog make_synthetic_log(const SyntheticConfig& cfg) {
  if (cfg.n_users < 1 || cfg.n_items < 2 || cfg.ratings_per_user < 1) {
    throw std::invalid_argument("make_synthetic_log: bad sizes");
  }
  if (cfg.ratings_per_user > cfg.n_items) {
    throw std::invalid_argument(
        "make_synthetic_log: more ratings per user than items");
  }
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x73796e74));  // "synt"
  const int k = cfg.latent_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));

  std::vector<Vec> item_taste(static_cast<std::size_t>(cfg.n_items));
  Vec item_quality(static_cast<std::size_t>(cfg.n_items));
  Vec item_pop(static_cast<std::size_t>(cfg.n_items));
  for (int j = 0; j < cfg.n_items; ++j) {
    auto& q = item_taste[static_cast<std::size_t>(j)];
    q.resize(static_cast<std::size_t>(k));
    for (auto& v : q) v = normal01(rng) * scale;
    item_quality[static_cast<std::size_t>(j)] = normal01(rng) * 0.4;
    item_pop[static_cast<std::size_t>(j)] = std::exp(0.8 * normal01(rng));
  }

  InteractionLog log;
  log.rating_threshold = 3;
  const double pop_sum =
      std::accumulate(item_pop.begin(), item_pop.end(), 0.0);
  Vec pop_cdf(item_pop.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < item_pop.size(); ++j) {
    acc += item_pop[j] / pop_sum;
    pop_cdf[j] = acc;
  }
  pop_cdf.back() = 1.0;

  for (int u = 0; u < cfg.n_users; ++u) {
    Vec taste(static_cast<std::size_t>(k));
    for (auto& v : taste) v = normal01(rng) * scale;

    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < cfg.ratings_per_user) {
      const double r = uniform01(rng);
      const auto it = std::upper_bound(pop_cdf.begin(), pop_cdf.end(), r);
      chosen.insert(static_cast<int>(
          std::min<std::ptrdiff_t>(it - pop_cdf.begin(), cfg.n_items - 1)));
    }
    std::vector<int> order(chosen.begin(), chosen.end());
    fisher_yates(order, rng);

    std::int64_t ts = 800000000 + static_cast<std::int64_t>(u) * 100000;
    for (int j : order) {
      const double score =
          1.3 * dot(taste, item_taste[static_cast<std::size_t>(j)]) +
          item_quality[static_cast<std::size_t>(j)] + 0.5 * normal01(rng);
      const int rating = std::clamp(
          static_cast<int>(std::lround(3.55 + score)), 1, 5);
      Interaction rec;
      rec.user_id = u + 1;
      rec.item_id = j + 1;
      rec.rating = rating;
      rec.timestamp = ts;
      rec.desired = rating > log.rating_threshold;
      log.records.push_back(rec);
      ts += 3600;
    }
  }
  return log;
}

InteractionLog subset_users(const InteractionLog& log, int n_users,
                            std::uint64_t seed) {
  std::vector<int> users = log.user_ids();
  if (n_users <= 0 || n_users >= static_cast<int>(users.size())) return log;
  std::mt19937_64 rng(mix_seed(seed, 0x73756273));  // "subs"
  fisher_yates(users, rng);
  std::unordered_set<int> keep(users.begin(), users.begin() + n_users);
  InteractionLog out;
  out.rating_threshold = log.rating_threshold;
  for (const auto& r : log.records) {
    if (keep.count(r.user_id)) out.records.push_back(r);
  }
  return out;
}

}  // namespace fairrec
