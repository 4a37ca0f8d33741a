#include "glocom/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "glocom/error.hpp"

#include "json.hpp"

namespace glocom {

double topic_diversity(const TopicSet& topics) {
  require(!topics.empty(), "topic_diversity: no topics");
  const std::size_t n = topics.front().size();
  require(n > 0, "topic_diversity: empty topic word list");
  std::set<std::string> distinct;
  for (const auto& t : topics) {
    require(t.size() == n, "topic_diversity: topic word lists differ in length");
    distinct.insert(t.begin(), t.end());
  }
  return static_cast<double>(distinct.size()) / static_cast<double>(topics.size() * n);
}

namespace {

void check_aligned(std::span<const int> predicted, std::span<const int> gold) {
  require(!predicted.empty(), "clustering metric: empty label lists");
  if (predicted.size() != gold.size()) {
    fail(ErrorKind::Invalid, "clustering metric: " + std::to_string(predicted.size()) + " predictions for " +
                                 std::to_string(gold.size()) + " gold labels");
  }
}

}  // namespace

double purity(std::span<const int> predicted, std::span<const int> gold) {
  check_aligned(predicted, gold);
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < predicted.size(); ++i) ++table[predicted[i]][gold[i]];
  std::size_t hits = 0;
  for (const auto& [cluster, classes] : table) {
    std::size_t best = 0;
    for (const auto& [cls, n] : classes) best = std::max(best, n);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double nmi(std::span<const int> predicted, std::span<const int> gold) {
  check_aligned(predicted, gold);
  const double n = static_cast<double>(predicted.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pc, gc;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    joint[{predicted[i], gold[i]}] += 1.0;
    pc[predicted[i]] += 1.0;
    gc[gold[i]] += 1.0;
  }
  double mi = 0.0;
  for (const auto& [key, nij] : joint) {
    mi += (nij / n) * std::log(n * nij / (pc[key.first] * gc[key.second]));
  }
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [label, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double denom = 0.5 * (entropy(pc) + entropy(gc));
  if (denom <= 0.0) return 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

std::vector<int> argmax_rows(const Tensor2& theta) {
  std::vector<int> out(theta.rows());
  for (std::size_t r = 0; r < theta.rows(); ++r) {
    auto row = theta.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

NpmiResult npmi_coherence(const TopicSet& topics, const BowCorpus& reference, const Vocabulary& reference_vocab) {
  require(reference.num_docs() > 0, "npmi_coherence: empty reference corpus");
  require(reference.vocab_size() == reference_vocab.size(), "npmi_coherence: reference vocabulary size mismatch");
  const double n_docs = static_cast<double>(reference.num_docs());

  // Document sets for every word that appears in some topic.
  std::unordered_map<std::size_t, std::vector<std::uint32_t>> postings;
  for (const auto& t : topics) {
    for (const auto& w : t) {
      if (auto id = reference_vocab.find(w)) postings.emplace(*id, std::vector<std::uint32_t>{});
    }
  }
  for (std::size_t d = 0; d < reference.num_docs(); ++d) {
    for (const auto& e : reference.doc(d)) {
      auto it = postings.find(e.word);
      if (it != postings.end()) it->second.push_back(static_cast<std::uint32_t>(d));
    }
  }
  auto co_count = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::size_t i = 0, j = 0, c = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) ++i;
      else if (b[j] < a[i]) ++j;
      else {
        ++c;
        ++i;
        ++j;
      }
    }
    return c;
  };

  NpmiResult result;
  for (const auto& t : topics) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        ++pairs;
        const auto a = reference_vocab.find(t[i]);
        const auto b = reference_vocab.find(t[j]);
        if (!a || !b) {
          sum += -1.0;
          continue;
        }
        const auto& pa = postings.at(*a);
        const auto& pb = postings.at(*b);
        const std::size_t nab = co_count(pa, pb);
        if (nab == 0 || pa.empty() || pb.empty()) {
          sum += -1.0;
          continue;
        }
        const double p_ab = (static_cast<double>(nab) + kNpmiSmoothing) / n_docs;
        const double p_a = static_cast<double>(pa.size()) / n_docs;
        const double p_b = static_cast<double>(pb.size()) / n_docs;
        const double neg_log_joint = -std::log(p_ab);
        double v = 1.0;
        if (neg_log_joint > 0.0) v = (std::log(p_ab) - std::log(p_a * p_b)) / neg_log_joint;
        sum += std::clamp(v, -1.0, 1.0);
      }
    }
    result.per_topic.push_back(pairs ? sum / static_cast<double>(pairs) : 0.0);
  }
  double total = 0.0;
  for (double v : result.per_topic) total += v;
  result.mean = result.per_topic.empty() ? 0.0 : total / static_cast<double>(result.per_topic.size());
  return result;
}

std::string metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["td"] = m.td;
  j["purity"] = m.purity ? nlohmann::ordered_json(*m.purity) : nlohmann::ordered_json(nullptr);
  j["nmi"] = m.nmi ? nlohmann::ordered_json(*m.nmi) : nlohmann::ordered_json(nullptr);
  j["npmi"] = m.npmi;
  j["npmi_per_topic"] = m.npmi_per_topic;
  return j.dump(2) + "\n";
}

}  // namespace glocom
