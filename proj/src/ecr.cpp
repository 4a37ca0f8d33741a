#include "glocom/ecr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "glocom/error.hpp"

namespace glocom {

namespace {

double log_sum_exp(const double* x, std::size_t n, std::size_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - mx);
  return mx + std::log(s);
}

}  // namespace

double transport_objective(const Tensor2& cost, const Tensor2& psi, double nu) {
  double obj = 0.0;
  auto c = cost.values();
  auto p = psi.values();
  for (std::size_t i = 0; i < c.size(); ++i) {
    obj += c[i] * p[i];
    if (p[i] > 0.0) obj += nu * p[i] * (std::log(p[i]) - 1.0);
  }
  return obj;
}

double default_nu(const Tensor2& cost) {
  double s = 0.0;
  for (double v : cost.values()) s += v;
  return 0.5 * s / static_cast<double>(cost.size());
}

TransportPlan sinkhorn(const TransportProblem& problem) {
  const Tensor2& cost = problem.cost;
  const std::size_t n_rows = cost.rows();
  const std::size_t n_cols = cost.cols();
  require(n_rows > 0 && n_cols > 0, "sinkhorn: empty cost matrix");
  if (!(problem.nu > 0.0)) {
    std::ostringstream os;
    os << "sinkhorn: entropy weight nu must be positive, got " << problem.nu;
    fail(ErrorKind::Invalid, os.str());
  }
  if (!cost.all_finite()) fail(ErrorKind::Numeric, "sinkhorn: cost matrix has non-finite entries");
  for (double c : cost.values()) {
    if (c < 0.0) fail(ErrorKind::Invalid, "sinkhorn: cost matrix has negative entries");
  }

  const double nu = problem.nu;
  const double log_a = -std::log(static_cast<double>(n_rows));
  const double log_b = -std::log(static_cast<double>(n_cols));
  const double a = 1.0 / static_cast<double>(n_rows);
  const double b = 1.0 / static_cast<double>(n_cols);

  std::vector<double> f(n_rows, 0.0), g(n_cols, 0.0);
  Tensor2 scratch(n_rows, n_cols);
  TransportPlan plan;
  plan.psi = Tensor2(n_rows, n_cols);

  auto fill_plan = [&] {
    for (std::size_t i = 0; i < n_rows; ++i) {
      for (std::size_t j = 0; j < n_cols; ++j) plan.psi(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / nu);
    }
  };
  auto marginal_error = [&] {
    double err = 0.0;
    std::vector<double> col(n_cols, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n_cols; ++j) {
        row += plan.psi(i, j);
        col[j] += plan.psi(i, j);
      }
      err += std::abs(row - a);
    }
    for (double c : col) err += std::abs(c - b);
    return err;
  };

  for (std::size_t it = 0; it < problem.max_iters; ++it) {
    for (std::size_t i = 0; i < n_rows; ++i) {
      for (std::size_t j = 0; j < n_cols; ++j) scratch(i, j) = (g[j] - cost(i, j)) / nu;
      f[i] = nu * (log_a - log_sum_exp(scratch.row(i).data(), n_cols, 1));
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      for (std::size_t j = 0; j < n_cols; ++j) scratch(i, j) = (f[i] - cost(i, j)) / nu;
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      g[j] = nu * (log_b - log_sum_exp(scratch.values().data() + j, n_rows, n_cols));
    }
    fill_plan();
    if (!plan.psi.all_finite()) {
      std::ostringstream os;
      os << "sinkhorn: numerical collapse at nu=" << nu;
      fail(ErrorKind::Numeric, os.str());
    }
    plan.iterations_used = it + 1;
    plan.objective_history.push_back(transport_objective(cost, plan.psi, nu));
    plan.marginal_error = marginal_error();
    if (plan.marginal_error < problem.tol) {
      plan.converged = true;
      break;
    }
  }
  if (plan.iterations_used == 0) {
    fill_plan();
    plan.marginal_error = marginal_error();
  }
  return plan;
}

double ecr_loss(const Tensor2& word_embeddings, const Tensor2& topic_embeddings, const Tensor2& psi) {
  const Tensor2 dist = pairwise_sq_dist(word_embeddings, topic_embeddings);
  require(dist.same_shape(psi), "ecr_loss: plan shape " + psi.shape_str() + " differs from cost " + dist.shape_str());
  double loss = 0.0;
  auto d = dist.values();
  auto p = psi.values();
  for (std::size_t i = 0; i < d.size(); ++i) loss += d[i] * p[i];
  return loss;
}

void ecr_loss_backward(const Tensor2& word_embeddings, const Tensor2& topic_embeddings,
                       const Tensor2& psi, double scale, Tensor2& grad_words, Tensor2& grad_topics) {
  require_shape(psi, word_embeddings.rows(), topic_embeddings.rows(), "ecr_loss_backward plan");
  Tensor2 d_dist = psi;
  for (double& v : d_dist.values()) v *= scale;
  pairwise_sq_dist_backward(word_embeddings, topic_embeddings, d_dist, grad_words, grad_topics);
}

}  // namespace glocom
