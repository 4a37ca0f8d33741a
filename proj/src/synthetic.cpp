#include "glocom/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "glocom/error.hpp"
#include "glocom/model.hpp"

namespace glocom {

Tensor2 planted_beta(std::size_t V, std::size_t K, double block_mass) {
  require(K >= 1 && V >= K, "planted_beta: need 1 ≤ K ≤ V");
  require(block_mass > 0.0 && block_mass <= 1.0, "planted_beta: block mass must lie in (0, 1]");
  const std::size_t block = (V + K - 1) / K;
  Tensor2 beta(V, K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t lo = std::min(V, k * block);
    const std::size_t hi = std::min(V, lo + block);
    require(hi > lo, "planted_beta: topic " + std::to_string(k) + " has an empty word block");
    const std::size_t rest = V - (hi - lo);
    const double in_block = (rest == 0 ? 1.0 : block_mass) / static_cast<double>(hi - lo);
    const double outside = rest == 0 ? 0.0 : (1.0 - block_mass) / static_cast<double>(rest);
    for (std::size_t v = 0; v < V; ++v) beta(v, k) = (v >= lo && v < hi) ? in_block : outside;
  }
  return beta;
}

namespace {

std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  // rounding slack: last index with positive mass
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
  require(spec.V >= 2 && spec.K >= 1 && spec.G >= 1 && spec.D >= spec.G, "generate: need V ≥ 2, K ≥ 1, 1 ≤ G ≤ D");
  require(spec.doc_min >= 2 && spec.doc_max >= spec.doc_min, "generate: document lengths must satisfy 2 ≤ min ≤ max");
  require(spec.epsilon_true >= 0.0, "generate: epsilon_true must be non-negative");
  require(spec.embedding_dim >= 1, "generate: embedding dimension must be positive");
  require(spec.word_embedding_noise >= 0.0, "generate: word embedding noise must be non-negative");

  Rng rng = make_stream(spec.seed, "synthesis");
  SyntheticData out;
  out.truth.beta = planted_beta(spec.V, spec.K, spec.block_mass);

  // Cluster membership, redrawn until all G clusters are non-empty.
  std::uniform_int_distribution<std::size_t> pick_cluster(0, spec.G - 1);
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt >= spec.max_retries) fail(ErrorKind::Invalid, "generate: could not populate every cluster");
    out.truth.cluster_labels.assign(spec.D, 0);
    std::vector<std::size_t> sizes(spec.G, 0);
    for (auto& c : out.truth.cluster_labels) {
      c = static_cast<int>(pick_cluster(rng));
      ++sizes[c];
    }
    if (std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; })) break;
  }

  std::normal_distribution<double> std_normal(0.0, 1.0);
  out.truth.theta_g = Tensor2(spec.G, spec.K);
  for (std::size_t g = 0; g < spec.G; ++g) {
    Tensor2 alpha(1, spec.K);
    for (std::size_t k = 0; k < spec.K; ++k) alpha(0, k) = std_normal(rng);
    alpha(0, g % spec.K) += spec.cluster_affinity;
    const Tensor2 theta = softmax_rows(alpha);
    std::copy_n(theta.row(0).begin(), spec.K, out.truth.theta_g.row(g).begin());
  }

  // Word distribution per document is p = β θ^g_d.
  const double rho_sd = std::sqrt(spec.epsilon_true);
  std::uniform_int_distribution<std::size_t> pick_len(spec.doc_min, spec.doc_max);
  out.truth.theta_gd = Tensor2(spec.D, spec.K);
  std::vector<SparseDoc> docs(spec.D);
  std::vector<double> rho(spec.K);
  std::vector<std::uint32_t> counts(spec.V);
  for (std::size_t d = 0; d < spec.D; ++d) {
    const auto g = static_cast<std::size_t>(out.truth.cluster_labels[d]);
    for (auto& r : rho) r = 1.0 + rho_sd * std_normal(rng);
    const auto theta = combine(out.truth.theta_g.row(g), rho);
    std::copy(theta.begin(), theta.end(), out.truth.theta_gd.row(d).begin());
    const std::size_t len = pick_len(rng);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt >= spec.max_retries) fail(ErrorKind::Invalid, "generate: could not draw a document with two distinct words");
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t n = 0; n < len; ++n) {
        const std::size_t z = sample_categorical(theta, rng);
        std::vector<double> column(spec.V);
        for (std::size_t v = 0; v < spec.V; ++v) column[v] = out.truth.beta(v, z);
        ++counts[sample_categorical(column, rng)];
      }
      std::size_t distinct = 0;
      for (auto c : counts) distinct += c > 0;
      if (distinct >= 2) break;
    }
    for (std::size_t v = 0; v < spec.V; ++v) {
      if (counts[v] > 0) docs[d].push_back({static_cast<std::uint32_t>(v), counts[v]});
    }
  }
  out.corpus = BowCorpus(spec.V, std::move(docs), out.truth.cluster_labels);

  std::vector<std::string> words;
  const int width = static_cast<int>(std::to_string(spec.V - 1).size());
  for (std::size_t v = 0; v < spec.V; ++v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%0*zu", width, v);
    words.emplace_back(buf);
  }
  out.vocab = Vocabulary(std::move(words));

  // Stand-in for sentence embeddings: unit centroid per cluster plus isotropic noise.
  Tensor2 centroids(spec.G, spec.embedding_dim);
  for (std::size_t g = 0; g < spec.G; ++g) {
    double n2 = 0.0;
    for (double& v : centroids.row(g)) {
      v = std_normal(rng);
      n2 += v * v;
    }
    for (double& v : centroids.row(g)) v /= std::sqrt(n2);
  }
  out.doc_embeddings = Tensor2(spec.D, spec.embedding_dim);
  for (std::size_t d = 0; d < spec.D; ++d) {
    auto c = centroids.row(static_cast<std::size_t>(out.truth.cluster_labels[d]));
    auto e = out.doc_embeddings.row(d);
    for (std::size_t t = 0; t < spec.embedding_dim; ++t) e[t] = c[t] + spec.embedding_noise * std_normal(rng);
  }

  // Stand-in for pretrained word vectors: words of one planted block share a centroid.
  // Drawn from their own stream so the corpus does not depend on these settings.
  if (spec.word_embedding_dim > 0) {
    Rng wrng = make_stream(spec.seed, "wordvec");
    std::normal_distribution<double> word_normal(0.0, 1.0);
    const std::size_t L = spec.word_embedding_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    const std::size_t block = (spec.V + spec.K - 1) / spec.K;
    Tensor2 word_centroids(spec.K, L);
    for (double& v : word_centroids.values()) v = word_normal(wrng) * scale;
    out.word_embeddings = Tensor2(spec.V, L);
    for (std::size_t v = 0; v < spec.V; ++v) {
      auto c = word_centroids.row(std::min(v / block, spec.K - 1));
      auto e = out.word_embeddings.row(v);
      for (std::size_t t = 0; t < L; ++t) e[t] = c[t] + spec.word_embedding_noise * word_normal(wrng) * scale;
    }
  }
  return out;
}

Tensor2 column_cosines(const Tensor2& a, const Tensor2& b) {
  require(a.rows() == b.rows(), "column_cosines: row counts differ");
  Tensor2 out(a.cols(), b.cols());
  std::vector<double> na(a.cols(), 0.0), nb(b.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t i = 0; i < a.cols(); ++i) na[i] += a(r, i) * a(r, i);
    for (std::size_t j = 0; j < b.cols(); ++j) nb[j] += b(r, j) * b(r, j);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(r, i) * b(r, j);
    }
  }
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      const double denom = std::sqrt(na[i] * nb[j]);
      out(i, j) = denom > 0.0 ? out(i, j) / denom : 0.0;
    }
  }
  return out;
}

std::vector<std::size_t> exhaustive_max(const Tensor2& score) {
  require(score.rows() == score.cols(), "exhaustive_max: score matrix must be square");
  const std::size_t n = score.rows();
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += score(i, perm[i]);
    if (s > best_score) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<std::size_t> hungarian_max(const Tensor2& score) {
  require(score.rows() == score.cols(), "hungarian_max: score matrix must be square");
  const std::size_t n = score.rows();
  // Shortest-augmenting-path Hungarian on cost = −score, 1-based potentials.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -score(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n);
  for (std::size_t j = 1; j <= n; ++j) result[p[j] - 1] = j - 1;
  return result;
}

TopicMatch match_topics(const Tensor2& learned_beta, const Tensor2& planted_beta) {
  if (!learned_beta.same_shape(planted_beta)) {
    fail(ErrorKind::Invalid, "match_topics: learned β " + learned_beta.shape_str() + " vs planted β " +
                                 planted_beta.shape_str());
  }
  const Tensor2 cos = column_cosines(learned_beta, planted_beta);
  TopicMatch m;
  m.permutation = cos.rows() <= 8 ? exhaustive_max(cos) : hungarian_max(cos);
  for (std::size_t k = 0; k < m.permutation.size(); ++k) m.cosine.push_back(cos(k, m.permutation[k]));
  return m;
}

}  // namespace glocom
