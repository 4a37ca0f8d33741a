#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glocom/rng.hpp"

namespace glocom {

/// Dense row-major matrix of doubles.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what);

/// a (n×k) · b (k×m). Zero entries of `a` are skipped, so sparse inputs are cheap.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// a (n×k) · bᵀ where b is (m×k).
Tensor2 matmul_bt(const Tensor2& a, const Tensor2& b);
/// out += aᵀ · b, with a (n×k), b (n×m), out (k×m).
void add_at_b(Tensor2& out, const Tensor2& a, const Tensor2& b);

// --- differentiable building blocks -------------------------------------

/// y = x·W + b with W stored (in × out) and b (1 × out).
Tensor2 affine_forward(const Tensor2& x, const Tensor2& weight, const Tensor2& bias);
/// Accumulates into grad_weight / grad_bias. Returns dx, or an empty tensor
/// when `want_input_grad` is false.
Tensor2 affine_backward(const Tensor2& x, const Tensor2& weight, const Tensor2& dy,
                        Tensor2& grad_weight, Tensor2& grad_bias, bool want_input_grad = true);

double softplus(double x);
Tensor2 softplus_forward(const Tensor2& x);
Tensor2 softplus_backward(const Tensor2& x, const Tensor2& dy);

/// Row-wise softmax with max subtraction.
Tensor2 softmax_rows(const Tensor2& x);
/// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
Tensor2 softmax_rows_backward(const Tensor2& y, const Tensor2& dy);
Tensor2 log_softmax_rows(const Tensor2& x);

/// D(i,j) = ‖a_i − b_j‖² for a (n×L), b (m×L).
Tensor2 pairwise_sq_dist(const Tensor2& a, const Tensor2& b);
/// Accumulates dL/da and dL/db given dL/dD.
void pairwise_sq_dist_backward(const Tensor2& a, const Tensor2& b, const Tensor2& d_dist,
                               Tensor2& grad_a, Tensor2& grad_b);

// --- Gaussian latent helpers ---------------------------------------------

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

double clamp_log_var(double lv);
/// Clamps every entry to [kLogVarMin, kLogVarMax].
Tensor2 clamp_log_var(const Tensor2& lv);
/// Zeroes gradient entries whose forward input was outside the clamp range.
Tensor2 clamp_log_var_backward(const Tensor2& lv_raw, const Tensor2& dy);

/// mu + exp(0.5·log_var) ⊙ noise, with log_var clamped.
Tensor2 gaussian_reparameterize(const Tensor2& mu, const Tensor2& log_var, const Tensor2& noise);
void gaussian_reparameterize_backward(const Tensor2& log_var, const Tensor2& noise,
                                      const Tensor2& dz, Tensor2& grad_mu, Tensor2& grad_log_var);

/// KL(N(mu_q, diag exp(log_var_q)) ‖ N(mu_p, var_p·I)).
double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> log_var_q,
                        std::span<const double> mu_p, double var_p);
double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> log_var_q,
                        double mu_p, double var_p);
/// Adds scale·∂KL/∂mu_q and scale·∂KL/∂log_var_q (prior mean shared by all coordinates).
void kl_diag_gaussian_grad(std::span<const double> mu_q, std::span<const double> log_var_q,
                           double mu_p, double var_p, double scale,
                           std::span<double> grad_mu, std::span<double> grad_log_var);

// --- parameters and optimization -----------------------------------------

struct ParamRef {
  std::string name;
  Tensor2* value;
  Tensor2* grad;
};

/// Fully connected layer; weight is stored (in × out).
struct DenseLayer {
  Tensor2 weight;
  Tensor2 bias;
  Tensor2 grad_weight;
  Tensor2 grad_bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out);

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  /// U(−1/√in, 1/√in) for weights and bias.
  void init_uniform(Rng& rng);
  Tensor2 forward(const Tensor2& x) const { return affine_forward(x, weight, bias); }
  Tensor2 backward(const Tensor2& x, const Tensor2& dy, bool want_input_grad = true) {
    return affine_backward(x, weight, dy, grad_weight, grad_bias, want_input_grad);
  }
  void zero_grad();
  void append_params(const std::string& prefix, std::vector<ParamRef>& out);
};

struct AdamOptions {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
  long step = 0;

  AdamState() = default;
  AdamState(AdamOptions opts, std::span<const ParamRef> params);
};

/// One bias-corrected Adam update of every parameter from its gradient buffer.
void adam_step(std::span<const ParamRef> params, AdamState& state);

/// Worker count from GLOCOM_THREADS (default: hardware concurrency, ≥ 1).
unsigned thread_budget();
/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so results do not depend on the thread count when fn writes per-index.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace glocom
