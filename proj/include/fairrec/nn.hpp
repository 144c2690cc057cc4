#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fairrec {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

Vec matvec(const Matrix& m, const Vec& x);

// Cholesky factorization A = L L^T for symmetric positive definite A.
// Returns false if a pivot is not strictly positive.
bool cholesky(const Matrix& a, Matrix& lower);
Vec cholesky_solve(const Matrix& lower, const Vec& rhs);

struct AdamParams {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-tensor first/second moment accumulators.
struct AdamState {
  long long t = 0;
  Vec m;
  Vec v;
  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update. grad_scale multiplies the raw gradient
// (used to fold in 1/batch). Throws on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamParams& hp, double grad_scale = 1.0);

// Fully connected layer y = W x + b. Gradients accumulate into gw/gb until
// zero_grad; apply_adam consumes them.
struct DenseLayer {
  Matrix w;
  Vec b;
  Matrix gw;
  Vec gb;
  AdamState adam_w;
  AdamState adam_b;

  DenseLayer() = default;
  // Init: W uniform in +-sqrt(6/(in+out)), b zero.
  DenseLayer(int out, int in, std::mt19937_64& rng);

  int in_dim() const { return w.cols; }
  int out_dim() const { return w.rows; }

  Vec forward(const Vec& x) const;
  // Accumulates parameter gradients, returns dL/dx.
  Vec backward(const Vec& x, const Vec& upstream);
  // dL/dx only, parameters untouched.
  Vec input_grad(const Vec& upstream) const;
  void zero_grad();
  void apply_adam(const AdamParams& hp, double grad_scale = 1.0);
  void copy_values_from(const DenseLayer& other);
};

Vec relu(const Vec& x);
Vec relu_backward(const Vec& x, const Vec& upstream);

// Max-shifted softmax.
Vec softmax(const Vec& x);
// Softmax restricted to unmasked entries; masked entries get weight 0.
// If everything is masked the output is uniform (the caller's inputs are
// all-zero sentinels in that case, so any simplex point is equivalent).
Vec masked_softmax(const Vec& x, const std::vector<char>& masked);
// y is the softmax output at the point.
Vec softmax_backward(const Vec& y, const Vec& upstream);

// Central-difference gradient checker. `loss` re-evaluates the scalar loss
// from the current parameter values; `params` are live views that get
// perturbed in place and restored; `analytic` are the gradients under test.
// Returns max over coordinates of |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const std::function<double()>& loss,
                  const std::vector<std::span<double>>& params,
                  const std::vector<std::span<const double>>& analytic,
                  double h = 1e-5);

// Flat binary checkpoint format: header (magic, version, tensor count),
// then per tensor: name length, name bytes, rank, dims, f64 data.
struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  Vec data;
};

void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

}  // namespace fairrec
