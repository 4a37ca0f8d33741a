#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glocom/aggregation.hpp"
#include "glocom/corpus.hpp"
#include "glocom/ecr.hpp"
#include "glocom/model.hpp"

namespace glocom {

enum class Ablation { Full, NoClustering, NoAugmentation };

/// How the no-clustering ablation removes the global context.
enum class NocMode {
  Singleton,  // every document is its own cluster (G = D)
  Direct,     // singleton clusters and no adaptive variable: θ_d straight from x^d
};

struct EcrConfig {
  double nu = 0.05;  // ≤ 0 selects 0.5·mean(C) at initialization
  std::size_t max_iters = 50;
  double tol = 1e-6;
};

struct TrainConfig {
  std::size_t K = 50;
  std::size_t G = 200;
  double tau = 0.2;
  double eta = 0.1;
  double epsilon = 0.01;
  double lambda_ecr = 20.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 200;
  double lr = 0.002;
  std::size_t hidden_width = 200;
  std::size_t embed_dim = 200;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::Full;
  NocMode noc_mode = NocMode::Singleton;
  EmbeddingSource embedding_source = EmbeddingSource::PrecomputedFile;
  KlAttribution kl_attribution = KlAttribution::EqualShare;
  std::size_t kl_warmup_epochs = 0;  // 0 disables KL annealing
  std::size_t top_n = 15;
  EcrConfig ecr;
};

/// Throws on non-positive sizes/rates or negative coefficients.
void validate(const TrainConfig& config);

/// Effective η after the ablation switch (0 under NoAugmentation).
double effective_eta(const TrainConfig& config);
ModelOptions model_options(const TrainConfig& config);

/// Applies the ablation to a clustering: NoClustering swaps in singleton
/// clusters and checks x^g = x^d for every document.
struct TrainingData {
  ClusterAssignment assignment;
  GlobalCorpus global;
  std::vector<std::string> warnings;
};
TrainingData prepare_training_data(const BowCorpus& corpus, const ClusterAssignment& assignment,
                                   const TrainConfig& config);

struct EpochStats {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl_global = 0.0;
  double kl_local = 0.0;
  double ecr = 0.0;
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
  std::vector<EpochStats> trajectory;
  double wall_seconds = 0.0;
  double nu = 0.0;
  std::filesystem::path checkpoint;
};

struct TrainResult {
  GlocomModel model;
  TrainReport report;
};

/// L_GloCOM = L_TM + λ·L_ECR for one batch with a fixed transport plan.
struct ObjectiveValue {
  LossBreakdown tm;
  double ecr = 0.0;
  double total = 0.0;
};
ObjectiveValue glocom_objective(GlocomModel& model, const Batch& batch, const BatchNoise& noise,
                                const Tensor2* psi, double lambda_ecr, bool accumulate_grads);

/// Sinkhorn plan for the model's current embeddings.
TransportPlan current_plan(const GlocomModel& model, double nu, const EcrConfig& ecr);

/// Adam training over shuffled document batches. `word_init` (V × embed_dim)
/// replaces the random word-embedding init when given.
TrainResult train(const BowCorpus& corpus, const TrainingData& data, const TrainConfig& config,
                  const Tensor2* word_init = nullptr);

struct GridEntry {
  TrainConfig config;
  std::map<std::string, double> point;  // grid coordinates of this entry
  double objective = 0.0;               // NMI (higher is better) or final loss (lower is better)
  std::optional<double> nmi;
  double final_loss = 0.0;
};

struct GridReport {
  std::vector<GridEntry> ranked;  // best first
  bool by_nmi = false;
};

/// Keys may be any of eta, epsilon, lambda_ecr, tau, lr, K. Every combination
/// is trained; entries rank by NMI against the corpus labels when present,
/// else by final epoch loss. Ties keep lexicographic grid order.
GridReport grid_search(const BowCorpus& corpus, const ClusterAssignment& assignment, const TrainConfig& base,
                       const std::map<std::string, std::vector<double>>& grids, const Tensor2* word_init = nullptr);

/// The grid used for hyperparameter selection: η, ε and λ_ECR.
std::map<std::string, std::vector<double>> default_grids();

}  // namespace glocom
