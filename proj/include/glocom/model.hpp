#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glocom/aggregation.hpp"
#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"
#include "glocom/rng.hpp"

namespace glocom {

/// How each cluster's global KL enters the per-document losses of a batch.
enum class KlAttribution {
  EqualShare,  // once per distinct cluster in the batch, split across its documents
  PerDocument, // every document carries the full term
};

struct ModelShape {
  std::size_t vocab_size = 0;
  std::size_t num_topics = 0;
  std::size_t embed_dim = 200;
  std::size_t hidden_width = 200;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct ModelOptions {
  double tau = 0.2;
  double epsilon = 0.01;  // prior variance of the adaptive variable
  KlAttribution kl_attribution = KlAttribution::EqualShare;
  bool adaptive = true;   // false pins rho to its prior mean (1) and drops its KL
  double kl_weight = 1.0; // annealing factor on both KL terms; not persisted
};

/// Word and topic embeddings with their gradient buffers.
struct TopicSpace {
  Tensor2 word_embeddings;   // V × L
  Tensor2 topic_embeddings;  // K × L
  Tensor2 grad_words;
  Tensor2 grad_topics;
  double tau = 0.2;
};

/// β(i,j) = softmax_j(−‖w_i − t_j‖² / τ). Rows sum to one.
Tensor2 compute_beta(const Tensor2& word_embeddings, const Tensor2& topic_embeddings, double tau);
/// Accumulates gradients of β into the embedding gradients.
void compute_beta_backward(const Tensor2& word_embeddings, const Tensor2& topic_embeddings,
                           const Tensor2& beta, const Tensor2& d_beta, double tau,
                           Tensor2& grad_words, Tensor2& grad_topics);

/// Two softplus layers followed by linear mean and log-variance heads.
class Encoder {
 public:
  struct Cache {
    Tensor2 input, a1, h1, a2, h2, mu, log_var_raw, log_var;
  };

  Encoder() = default;
  Encoder(std::size_t input_dim, std::size_t hidden, std::size_t latent);

  void init(Rng& rng);
  /// Rows of `normalized_input` must sum to one.
  Cache forward(const Tensor2& normalized_input) const;
  /// (mu, clamped log-variance) for one normalized input row.
  std::pair<std::vector<double>, std::vector<double>> encode(std::span<const double> normalized_input) const;
  void backward(const Cache& cache, const Tensor2& d_mu, const Tensor2& d_log_var);
  void zero_grad();
  void append_params(const std::string& prefix, std::vector<ParamRef>& out);

  std::size_t latent_dim() const { return mean_.out_dim(); }

 private:
  DenseLayer hidden1_, hidden2_, mean_, log_var_;
};

class GlocomModel {
 public:
  GlocomModel() = default;
  GlocomModel(const ModelShape& shape, const ModelOptions& options);

  /// Encoders get PyTorch-style uniform init; topic embeddings N(0, 0.1²);
  /// word embeddings are taken from `word_init` when given, else U[−0.05, 0.05].
  void initialize(Rng& rng, const Tensor2* word_init = nullptr);

  const ModelShape& shape() const { return shape_; }
  const ModelOptions& options() const { return options_; }
  ModelOptions& options() { return options_; }
  TopicSpace& space() { return space_; }
  const TopicSpace& space() const { return space_; }
  Encoder& global_encoder() { return phi_; }
  const Encoder& global_encoder() const { return phi_; }
  Encoder& local_encoder() { return gamma_; }
  const Encoder& local_encoder() const { return gamma_; }

  Tensor2 beta() const;
  std::vector<ParamRef> params();
  void zero_grad();
  /// Rounds every parameter to float32, the checkpoint storage precision.
  void snap_to_storage_precision();

 private:
  ModelShape shape_;
  ModelOptions options_;
  TopicSpace space_;
  Encoder phi_;
  Encoder gamma_;
};

/// BoW divided by its sum; throws on an all-zero vector.
std::vector<double> normalize_bow(std::span<const double> counts);

/// softmax(θ^g ⊙ ρ).
std::vector<double> combine(std::span<const double> theta_g, std::span<const double> rho);

/// −x̃ᵀ log softmax(β θ) + kl_global_share + kl_local.
double elbo_per_doc(std::span<const double> x_aug, std::span<const double> theta_gd, const Tensor2& beta,
                    double kl_global_share, double kl_local);

/// Dense per-batch views: documents, the distinct clusters they touch, and
/// their normalized encoder inputs and augmented reconstruction targets.
struct Batch {
  std::vector<std::size_t> docs;
  std::vector<std::size_t> clusters;
  std::vector<std::size_t> cluster_slot;  // per doc, index into `clusters`
  Tensor2 local_input;                    // B × V
  Tensor2 global_input;                   // C × V
  Tensor2 target;                         // B × V
};

Batch make_batch(const BowCorpus& corpus, const ClusterAssignment& assignment,
                 const GlobalCorpus& global, std::span<const std::size_t> docs);

struct BatchNoise {
  Tensor2 global;  // C × K
  Tensor2 local;   // B × K
};

BatchNoise draw_noise(const Batch& batch, std::size_t num_topics, Rng& rng);
BatchNoise zero_noise(const Batch& batch, std::size_t num_topics);

struct LatentBatch {
  Tensor2 theta_g;   // C × K
  Tensor2 rho;       // B × K
  Tensor2 theta_gd;  // B × K
  std::vector<double> kl_global;  // per cluster slot
  std::vector<double> kl_local;   // per document
};

/// Batch means of the topic-model loss and its parts.
struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl_global = 0.0;
  double kl_local = 0.0;
};

struct TmForward {
  LossBreakdown loss;
  LatentBatch latent;
  std::vector<double> per_doc;  // elbo_per_doc for each batch document
};

/// Mean over the batch of the per-document losses; gradients are accumulated
/// into the model buffers when `accumulate_grads` is set.
TmForward corpus_loss(GlocomModel& model, const Batch& batch, const BatchNoise& noise,
                      bool accumulate_grads);

struct TopicModelOutput {
  Tensor2 beta;          // V × K
  Tensor2 theta_global;  // G × K
  Tensor2 theta_local;   // D × K
  std::vector<std::vector<std::size_t>> top_words;  // K lists of N word ids
};

/// Noise-free posterior-mean inference.
TopicModelOutput infer(const GlocomModel& model, const BowCorpus& corpus, const ClusterAssignment& assignment,
                       std::size_t top_n);

/// Word ids of topic `k` sorted by descending β(·,k), ties to the lower id.
std::vector<std::size_t> top_words(const Tensor2& beta, std::size_t k, std::size_t n);

// Checkpoint: manifest.txt (header + "name rows cols" per tensor) and one
// GEMB file per tensor.
void save_checkpoint(const std::filesystem::path& dir, GlocomModel& model);
GlocomModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace glocom
