#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"

namespace glocom {

struct KMeansOptions {
  std::size_t groups = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-8;
  bool l2_normalize = false;
};

struct ClusterAssignment {
  std::vector<std::size_t> assignment;  // per document, < groups
  std::size_t groups = 0;
  Tensor2 centroids;                    // groups × E; empty for synthetic/singleton assignments
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per assignment pass
  std::size_t iterations = 0;

  std::vector<std::size_t> cluster_sizes() const;
};

/// Lloyd iterations from k-means++ seeds drawn from the "clustering" stream of `seed`.
ClusterAssignment kmeans(const EmbeddingMatrix& embeddings, const KMeansOptions& options);
/// Lloyd iterations from explicit initial centroids (rows of `points` are used as given).
ClusterAssignment kmeans_from_centroids(const Tensor2& points, Tensor2 centroids,
                                        std::size_t max_iters, double tol);
Tensor2 kmeanspp_seeds(const Tensor2& points, std::size_t groups, Rng& rng);
/// Row-wise L2 normalization; zero rows stay zero.
Tensor2 l2_normalize_rows(const Tensor2& m);

/// Wraps externally supplied cluster ids (e.g. a cluster file); groups = max id + 1.
ClusterAssignment assignment_from_ids(const std::vector<long long>& ids);
/// Every document its own cluster (the no-clustering ablation).
ClusterAssignment singleton_assignment(std::size_t num_docs);

using RealSparseDoc = std::vector<std::pair<std::uint32_t, double>>;

struct GlobalCorpus {
  std::vector<SparseDoc> global_docs;        // x^g per cluster
  std::vector<RealSparseDoc> augmented_docs; // x̃^d per document
  double eta = 0.0;
};

/// Per-cluster elementwise sum of member documents. Empty clusters give empty
/// documents and a message appended to `warnings`.
std::vector<SparseDoc> build_global_docs(const BowCorpus& corpus, const ClusterAssignment& assignment,
                                         std::vector<std::string>* warnings = nullptr);
/// x̃^d = x^d + eta·x^g(d).
std::vector<RealSparseDoc> build_augmented_docs(const BowCorpus& corpus,
                                                const std::vector<SparseDoc>& global_docs,
                                                const ClusterAssignment& assignment, double eta);
GlobalCorpus aggregate(const BowCorpus& corpus, const ClusterAssignment& assignment, double eta,
                       std::vector<std::string>* warnings = nullptr);

}  // namespace glocom
