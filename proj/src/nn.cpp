#include "fairrec/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "fairrec/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace fairrec {

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec matvec(const Matrix& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  Vec y(static_cast<std::size_t>(m.rows), 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

bool cholesky(const Matrix& a, Matrix& lower) {
  if (a.rows != a.cols) throw std::invalid_argument("cholesky: not square");
  const int n = a.rows;
  lower = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (s <= 0.0) return false;
        lower(i, i) = std::sqrt(s);
      } else {
        lower(i, j) = s / lower(j, j);
      }
    }
  }
  return true;
}

Vec cholesky_solve(const Matrix& lower, const Vec& rhs) {
  const int n = lower.rows;
  if (static_cast<int>(rhs.size()) != n) {
    throw std::invalid_argument("cholesky_solve: shape mismatch");
  }
  Vec y(rhs);
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= lower(k, i) * y[k];
    y[i] = s / lower(i, i);
  }
  return y;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamParams& hp, double grad_scale) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * grad_scale;
    if (!std::isfinite(g)) {
      throw std::runtime_error("adam_step: non-finite gradient, training diverged");
    }
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

DenseLayer::DenseLayer(int out, int in, std::mt19937_64& rng)
    : w(out, in),
      b(static_cast<std::size_t>(out), 0.0),
      gw(out, in),
      gb(static_cast<std::size_t>(out), 0.0),
      adam_w(w.data.size()),
      adam_b(b.size()) {
  const double r = std::sqrt(6.0 / (in + out));
  for (auto& v : w.data) v = uniform_range(rng, -r, r);
}

Vec DenseLayer::forward(const Vec& x) const {
  Vec y = matvec(w, x);
  for (int i = 0; i < out_dim(); ++i) y[i] += b[i];
  return y;
}

Vec DenseLayer::backward(const Vec& x, const Vec& upstream) {
  if (static_cast<int>(x.size()) != in_dim() ||
      static_cast<int>(upstream.size()) != out_dim()) {
    throw std::invalid_argument("DenseLayer::backward: shape mismatch");
  }
  for (int i = 0; i < out_dim(); ++i) {
    const double u = upstream[i];
    gb[i] += u;
    double* grow = gw.data.data() + static_cast<std::size_t>(i) * gw.cols;
    for (int j = 0; j < in_dim(); ++j) grow[j] += u * x[j];
  }
  return input_grad(upstream);
}

Vec DenseLayer::input_grad(const Vec& upstream) const {
  if (static_cast<int>(upstream.size()) != out_dim()) {
    throw std::invalid_argument("DenseLayer::input_grad: shape mismatch");
  }
  Vec gx(static_cast<std::size_t>(in_dim()), 0.0);
  for (int i = 0; i < out_dim(); ++i) {
    const double u = upstream[i];
    const double* row = w.data.data() + static_cast<std::size_t>(i) * w.cols;
    for (int j = 0; j < in_dim(); ++j) gx[j] += row[j] * u;
  }
  return gx;
}

void DenseLayer::zero_grad() {
  std::fill(gw.data.begin(), gw.data.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
}

void DenseLayer::apply_adam(const AdamParams& hp, double grad_scale) {
  adam_step(std::span<double>(w.data), std::span<const double>(gw.data), adam_w,
            hp, grad_scale);
  adam_step(std::span<double>(b), std::span<const double>(gb), adam_b, hp,
            grad_scale);
}

void DenseLayer::copy_values_from(const DenseLayer& other) {
  if (other.w.rows != w.rows || other.w.cols != w.cols) {
    throw std::invalid_argument("copy_values_from: shape mismatch");
  }
  w.data = other.w.data;
  b = other.b;
}

Vec relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Vec relu_backward(const Vec& x, const Vec& upstream) {
  if (x.size() != upstream.size()) {
    throw std::invalid_argument("relu_backward: shape mismatch");
  }
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? upstream[i] : 0.0;
  return g;
}

Vec softmax(const Vec& x) {
  Vec y(x.size());
  if (x.empty()) return y;
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    z += y[i];
  }
  for (auto& v : y) v /= z;
  return y;
}

Vec masked_softmax(const Vec& x, const std::vector<char>& masked) {
  if (x.size() != masked.size()) {
    throw std::invalid_argument("masked_softmax: shape mismatch");
  }
  Vec y(x.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!masked[i]) mx = std::max(mx, x[i]);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    std::fill(y.begin(), y.end(), 1.0 / static_cast<double>(x.size()));
    return y;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!masked[i]) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
  }
  for (auto& v : y) v /= z;
  return y;
}

Vec softmax_backward(const Vec& y, const Vec& upstream) {
  if (y.size() != upstream.size()) {
    throw std::invalid_argument("softmax_backward: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += upstream[i] * y[i];
  Vec g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] * (upstream[i] - s);
  return g;
}

double grad_check(const std::function<double()>& loss,
                  const std::vector<std::span<double>>& params,
                  const std::vector<std::span<const double>>& analytic,
                  double h) {
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("grad_check: tensor count mismatch");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto a = analytic[k];
    if (p.size() != a.size()) {
      throw std::invalid_argument("grad_check: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      const double lp = loss();
      p[i] = orig - h;
      const double lm = loss();
      p[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double denom = std::max({std::abs(a[i]), std::abs(num), 1e-8});
      worst = std::max(worst, std::abs(a[i] - num) / denom);
    }
  }
  return worst;
}

namespace {

constexpr char kMagic[4] = {'F', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    std::uint64_t n = 1;
    for (auto d : t.dims) {
      write_pod<std::uint64_t>(out, d);
      n *= d;
    }
    if (n != t.data.size()) {
      throw std::invalid_argument("checkpoint: dims do not match data for " +
                                  t.name);
    }
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    const auto name_len = read_pod<std::uint32_t>(in);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(in);
    t.dims.resize(rank);
    std::uint64_t n = 1;
    for (auto& d : t.dims) {
      d = read_pod<std::uint64_t>(in);
      n *= d;
    }
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + t.name);
  }
  return tensors;
}

}  // namespace fairrec
