#pragma once

#include <cstddef>
#include <vector>

#include "glocom/numerics.hpp"

namespace glocom {

/// Entropic OT between V words (mass 1/V each) and K topics (mass 1/K each).
struct TransportProblem {
  Tensor2 cost;  // V × K, non-negative
  double nu = 1.0;
  std::size_t max_iters = 50;
  double tol = 1e-6;
};

struct TransportPlan {
  Tensor2 psi;  // V × K
  std::size_t iterations_used = 0;
  bool converged = false;
  double marginal_error = 0.0;            // L1 row + column violation at exit
  std::vector<double> objective_history;  // ⟨C,ψ⟩ − νH(ψ) after each iteration
};

/// Log-domain Sinkhorn scaling.
TransportPlan sinkhorn(const TransportProblem& problem);

/// ⟨C,ψ⟩ − νH(ψ) with H(ψ) = −Σ ψ(log ψ − 1).
double transport_objective(const Tensor2& cost, const Tensor2& psi, double nu);

/// 0.5 · mean(C), the default entropy weight.
double default_nu(const Tensor2& cost);

/// Σ_ij ‖w_i − t_j‖² ψ_ij.
double ecr_loss(const Tensor2& word_embeddings, const Tensor2& topic_embeddings, const Tensor2& psi);
/// Adds scale·∂L_ECR/∂W and scale·∂L_ECR/∂T with ψ held constant.
void ecr_loss_backward(const Tensor2& word_embeddings, const Tensor2& topic_embeddings,
                       const Tensor2& psi, double scale, Tensor2& grad_words, Tensor2& grad_topics);

}  // namespace glocom
