#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"

namespace glocom {

/// Ranked top-N words per topic; N is the same for every topic.
using TopicSet = std::vector<std::vector<std::string>>;

/// Distinct words across all lists / (K·N).
double topic_diversity(const TopicSet& topics);

/// (1/D)·Σ_clusters max_class overlap.
double purity(std::span<const int> predicted, std::span<const int> gold);

/// Mutual information over the arithmetic mean of the two entropies (natural
/// log). Returns 0 when both entropies vanish.
double nmi(std::span<const int> predicted, std::span<const int> gold);

/// Argmax per row, ties to the lowest column.
std::vector<int> argmax_rows(const Tensor2& theta);

struct NpmiResult {
  double mean = 0.0;
  std::vector<double> per_topic;
};

inline constexpr double kNpmiSmoothing = 1e-12;

/// Mean over topics of the mean pairwise NPMI of each topic's words, with
/// document-level co-occurrence in `reference`. Pairs that never co-occur, or
/// that involve a word missing from the reference vocabulary, score −1.
NpmiResult npmi_coherence(const TopicSet& topics, const BowCorpus& reference, const Vocabulary& reference_vocab);

struct Metrics {
  double td = 0.0;
  std::optional<double> purity;
  std::optional<double> nmi;
  double npmi = 0.0;
  std::vector<double> npmi_per_topic;
};

std::string metrics_json(const Metrics& m);

}  // namespace glocom
