#pragma once

#include <cstdint>
#include <vector>

#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"

namespace glocom {

struct SyntheticSpec {
  std::size_t V = 100;
  std::size_t K = 5;
  std::size_t G = 5;
  std::size_t D = 1000;
  std::size_t doc_min = 4;
  std::size_t doc_max = 12;
  double epsilon_true = 0.01;
  double block_mass = 0.9;        // mass of each planted topic on its own word block
  double cluster_affinity = 5.0;  // pre-softmax boost of topic (g mod K) in cluster g
  std::size_t embedding_dim = 16; // simulated sentence-embedding width
  double embedding_noise = 0.15;  // per-coordinate std around the unit cluster centroid
  std::size_t word_embedding_dim = 200;  // simulated pretrained word vectors, 0 disables
  double word_embedding_noise = 0.1;     // spread of a word around its planted topic's centroid
  std::uint64_t seed = 0;
  std::size_t max_retries = 100;
};

struct SyntheticTruth {
  Tensor2 beta;      // V × K, each column a distribution over words
  Tensor2 theta_g;   // G × K
  Tensor2 theta_gd;  // D × K
  std::vector<int> cluster_labels;
};

struct SyntheticData {
  BowCorpus corpus;  // labels = planted clusters
  Vocabulary vocab;  // "w000", "w001", ...
  SyntheticTruth truth;
  Tensor2 doc_embeddings;  // D × embedding_dim, clustered around per-cluster centroids
  Tensor2 word_embeddings; // V × word_embedding_dim, clustered by planted word block
};

/// Block-structured planted β: topic k owns words [k·b, (k+1)·b), b = ⌈V/K⌉.
Tensor2 planted_beta(std::size_t V, std::size_t K, double block_mass);

/// Samples a corpus from the generative process: θ^g per cluster, ρ_d per
/// document, θ^g_d = softmax(θ^g ⊙ ρ_d), then topic and word draws.
SyntheticData generate(const SyntheticSpec& spec);

struct TopicMatch {
  std::vector<std::size_t> permutation;  // learned topic k ↔ planted topic permutation[k]
  std::vector<double> cosine;            // per learned topic
};

/// One-to-one matching of learned to planted β columns maximizing summed cosine.
TopicMatch match_topics(const Tensor2& learned_beta, const Tensor2& planted_beta);

/// Column cosine similarities: out(i, j) = cos(a[:, i], b[:, j]).
Tensor2 column_cosines(const Tensor2& a, const Tensor2& b);
/// Assignment row i → column result[i] maximizing Σ score(i, result[i]).
std::vector<std::size_t> hungarian_max(const Tensor2& score);
std::vector<std::size_t> exhaustive_max(const Tensor2& score);

}  // namespace glocom
