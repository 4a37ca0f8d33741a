#include "glocom/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "glocom/error.hpp"

namespace glocom {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "Tensor2: data length does not match " + shape_str());
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor2::shape_str() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected shape " << rows << "x" << cols << ", got " << t.shape_str();
    fail(ErrorKind::Invalid, os.str());
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + a.shape_str() + " · " +
                                    b.shape_str() + ")");
  Tensor2 out(a.rows(), b.cols());
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Tensor2 matmul_bt(const Tensor2& a, const Tensor2& b) {
  require(a.cols() == b.cols(), "matmul_bt: inner dimensions differ (" + a.shape_str() +
                                    " · " + b.shape_str() + "ᵀ)");
  Tensor2 out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += ar[t] * br[t];
      out(i, j) = s;
    }
  }
  return out;
}

void add_at_b(Tensor2& out, const Tensor2& a, const Tensor2& b) {
  require(a.rows() == b.rows(), "add_at_b: row counts differ");
  require_shape(out, a.cols(), b.cols(), "add_at_b output");
  const std::size_t m = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(r, i);
      if (s == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

Tensor2 affine_forward(const Tensor2& x, const Tensor2& weight, const Tensor2& bias) {
  require_shape(bias, 1, weight.cols(), "affine bias");
  Tensor2 y = matmul(x, weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    for (std::size_t j = 0; j < yr.size(); ++j) yr[j] += bias(0, j);
  }
  return y;
}

Tensor2 affine_backward(const Tensor2& x, const Tensor2& weight, const Tensor2& dy,
                        Tensor2& grad_weight, Tensor2& grad_bias, bool want_input_grad) {
  require_shape(dy, x.rows(), weight.cols(), "affine_backward dy");
  add_at_b(grad_weight, x, dy);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t j = 0; j < dy.cols(); ++j) grad_bias(0, j) += dy(r, j);
  }
  if (!want_input_grad) return {};
  return matmul_bt(dy, weight);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Tensor2 softplus_forward(const Tensor2& x) {
  Tensor2 y = x;
  for (double& v : y.values()) v = softplus(v);
  return y;
}

Tensor2 softplus_backward(const Tensor2& x, const Tensor2& dy) {
  require(x.same_shape(dy), "softplus_backward: shape mismatch");
  Tensor2 dx = dy;
  auto xv = x.values();
  auto dv = dx.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    // sigmoid, evaluated on the side that cannot overflow
    const double s = xv[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-xv[i]))
                                  : std::exp(xv[i]) / (1.0 + std::exp(xv[i]));
    dv[i] *= s;
  }
  return dx;
}

Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return y;
}

Tensor2 softmax_rows_backward(const Tensor2& y, const Tensor2& dy) {
  require(y.same_shape(dy), "softmax_rows_backward: shape mismatch");
  Tensor2 dx(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto gr = dy.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
    auto out = dx.row(r);
    for (std::size_t j = 0; j < yr.size(); ++j) out[j] = yr[j] * (gr[j] - dot);
  }
  return dx;
}

Tensor2 log_softmax_rows(const Tensor2& x) {
  Tensor2 y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (double& v : row) v -= lse;
  }
  return y;
}

Tensor2 pairwise_sq_dist(const Tensor2& a, const Tensor2& b) {
  require(a.cols() == b.cols(), "pairwise_sq_dist: embedding dimensions differ");
  Tensor2 d(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t t = 0; t < ai.size(); ++t) {
        const double diff = ai[t] - bj[t];
        s += diff * diff;
      }
      d(i, j) = s;
    }
  }
  return d;
}

void pairwise_sq_dist_backward(const Tensor2& a, const Tensor2& b, const Tensor2& d_dist,
                               Tensor2& grad_a, Tensor2& grad_b) {
  require_shape(d_dist, a.rows(), b.rows(), "pairwise_sq_dist_backward");
  require(grad_a.same_shape(a) && grad_b.same_shape(b),
          "pairwise_sq_dist_backward: gradient buffers misshapen");
  const std::size_t dim = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto gai = grad_a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double g = d_dist(i, j);
      if (g == 0.0) continue;
      auto bj = b.row(j);
      auto gbj = grad_b.row(j);
      for (std::size_t t = 0; t < dim; ++t) {
        const double diff = 2.0 * g * (ai[t] - bj[t]);
        gai[t] += diff;
        gbj[t] -= diff;
      }
    }
  }
}

double clamp_log_var(double lv) { return std::clamp(lv, kLogVarMin, kLogVarMax); }

Tensor2 clamp_log_var(const Tensor2& lv) {
  Tensor2 out = lv;
  for (double& v : out.values()) v = clamp_log_var(v);
  return out;
}

Tensor2 clamp_log_var_backward(const Tensor2& lv_raw, const Tensor2& dy) {
  require(lv_raw.same_shape(dy), "clamp_log_var_backward: shape mismatch");
  Tensor2 dx = dy;
  auto raw = lv_raw.values();
  auto dv = dx.values();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < kLogVarMin || raw[i] > kLogVarMax) dv[i] = 0.0;
  }
  return dx;
}

Tensor2 gaussian_reparameterize(const Tensor2& mu, const Tensor2& log_var, const Tensor2& noise) {
  require(mu.same_shape(log_var) && mu.same_shape(noise),
          "gaussian_reparameterize: shape mismatch");
  Tensor2 z = mu;
  auto zv = z.values();
  auto lv = log_var.values();
  auto nv = noise.values();
  for (std::size_t i = 0; i < zv.size(); ++i) {
    zv[i] += std::exp(0.5 * clamp_log_var(lv[i])) * nv[i];
  }
  return z;
}

void gaussian_reparameterize_backward(const Tensor2& log_var, const Tensor2& noise,
                                      const Tensor2& dz, Tensor2& grad_mu, Tensor2& grad_log_var) {
  require(log_var.same_shape(noise) && log_var.same_shape(dz),
          "gaussian_reparameterize_backward: shape mismatch");
  auto lv = log_var.values();
  auto nv = noise.values();
  auto gz = dz.values();
  auto gm = grad_mu.values();
  auto gl = grad_log_var.values();
  for (std::size_t i = 0; i < lv.size(); ++i) {
    gm[i] += gz[i];
    if (lv[i] < kLogVarMin || lv[i] > kLogVarMax) continue;
    gl[i] += gz[i] * nv[i] * 0.5 * std::exp(0.5 * lv[i]);
  }
}

namespace {

void check_prior_variance(double var_p) {
  if (!(var_p > 0.0)) {
    std::ostringstream os;
    os << "kl_diag_gaussian: prior variance must be positive, got " << var_p;
    fail(ErrorKind::Invalid, os.str());
  }
}

}  // namespace

double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> log_var_q,
                        std::span<const double> mu_p, double var_p) {
  check_prior_variance(var_p);
  require(mu_q.size() == log_var_q.size() && mu_q.size() == mu_p.size(),
          "kl_diag_gaussian: dimension mismatch");
  const double log_var_p = std::log(var_p);
  double kl = 0.0;
  for (std::size_t k = 0; k < mu_q.size(); ++k) {
    const double diff = mu_q[k] - mu_p[k];
    kl += std::exp(log_var_q[k]) / var_p + diff * diff / var_p - 1.0 + log_var_p - log_var_q[k];
  }
  return 0.5 * kl;
}

double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> log_var_q,
                        double mu_p, double var_p) {
  std::vector<double> prior(mu_q.size(), mu_p);
  return kl_diag_gaussian(mu_q, log_var_q, prior, var_p);
}

void kl_diag_gaussian_grad(std::span<const double> mu_q, std::span<const double> log_var_q,
                           double mu_p, double var_p, double scale,
                           std::span<double> grad_mu, std::span<double> grad_log_var) {
  check_prior_variance(var_p);
  for (std::size_t k = 0; k < mu_q.size(); ++k) {
    grad_mu[k] += scale * (mu_q[k] - mu_p) / var_p;
    grad_log_var[k] += scale * 0.5 * (std::exp(log_var_q[k]) / var_p - 1.0);
  }
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weight(in, out), bias(1, out), grad_weight(in, out), grad_bias(1, out) {}

void DenseLayer::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : weight.values()) w = dist(rng);
  for (double& b : bias.values()) b = dist(rng);
}

void DenseLayer::zero_grad() {
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
}

void DenseLayer::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

AdamState::AdamState(AdamOptions opts, std::span<const ParamRef> params) : options(opts) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.value->rows(), p.value->cols());
    second_moment.emplace_back(p.value->rows(), p.value->cols());
  }
}

void adam_step(std::span<const ParamRef> params, AdamState& state) {
  require(params.size() == state.first_moment.size(),
          "adam_step: optimizer state does not match parameter list");
  const auto& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].value->values();
    auto g = params[p].grad->values();
    auto m = state.first_moment[p].values();
    auto v = state.second_moment[p].values();
    require(w.size() == m.size() && g.size() == w.size(),
            "adam_step: buffer shape mismatch for " + params[p].name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GLOCOM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n >= 1) return static_cast<unsigned>(std::min<long>(n, hw));
  }
  return hw;
}

void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(thread_budget(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace glocom
