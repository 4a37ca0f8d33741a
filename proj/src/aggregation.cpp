#include "glocom/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "glocom/error.hpp"

namespace glocom {

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(groups, 0);
  for (auto g : assignment) ++sizes[g];
  return sizes;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Nearest centroid per point (ties → lowest index); returns total squared distance.
double assign_points(const Tensor2& points, const Tensor2& centroids, std::vector<std::size_t>& labels,
                     std::vector<double>& dist) {
  parallel_for(points.rows(), 256, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t g = 0; g < centroids.rows(); ++g) {
        const double d = sq_dist(points.row(i), centroids.row(g));
        if (d < best) {
          best = d;
          arg = g;
        }
      }
      labels[i] = arg;
      dist[i] = best;
    }
  });
  double total = 0.0;
  for (double d : dist) total += d;
  return total;
}

}  // namespace

Tensor2 l2_normalize_rows(const Tensor2& m) {
  Tensor2 out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double n2 = 0.0;
    for (double v : row) n2 += v * v;
    if (n2 > 0.0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (double& v : row) v *= inv;
    }
  }
  return out;
}

Tensor2 kmeanspp_seeds(const Tensor2& points, std::size_t groups, Rng& rng) {
  const std::size_t n = points.rows();
  Tensor2 centroids(groups, points.cols());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t g = 0; g < groups; ++g) {
    if (g > 0) {
      double total = 0.0;
      for (double d : nearest) total += d;
      if (total > 0.0) {
        const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          acc += nearest[i];
          if (nearest[i] > 0.0 && acc > u) {
            pick = i;
            break;
          }
        }
        if (pick == n) {
          // u landed on the rounding slack at the end; take the last positive-mass point
          for (std::size_t i = n; i-- > 0;) {
            if (nearest[i] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // every point coincides with a chosen centroid; fall back to an unchosen index
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) free.push_back(i);
        }
        pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
      }
    }
    chosen[pick] = true;
    std::copy_n(points.row(pick).begin(), points.cols(), centroids.row(g).begin());
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(points.row(i), centroids.row(g)));
    }
  }
  return centroids;
}

ClusterAssignment kmeans_from_centroids(const Tensor2& points, Tensor2 centroids,
                                        std::size_t max_iters, double tol) {
  require(points.cols() == centroids.cols(), "kmeans: centroid dimension differs from embeddings");
  const std::size_t n = points.rows();
  const std::size_t groups = centroids.rows();
  const std::size_t dim = points.cols();

  ClusterAssignment result;
  result.groups = groups;
  result.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  result.inertia = assign_points(points, centroids, result.assignment, dist);
  result.inertia_history.push_back(result.inertia);

  std::vector<std::size_t> previous;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Tensor2 next(groups, dim);
    std::vector<std::size_t> counts(groups, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = result.assignment[i];
      ++counts[g];
      auto c = next.row(g);
      auto p = points.row(i);
      for (std::size_t t = 0; t < dim; ++t) c[t] += p[t];
    }
    for (std::size_t g = 0; g < groups; ++g) {
      if (counts[g] == 0) continue;
      for (double& v : next.row(g)) v /= static_cast<double>(counts[g]);
    }
    // Empty clusters take the point farthest from its own (updated) centroid.
    for (std::size_t g = 0; g < groups; ++g) {
      if (counts[g] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = result.assignment[i];
        if (counts[own] == 0) continue;
        const double d = sq_dist(points.row(i), next.row(own));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      std::copy_n(points.row(far).begin(), dim, next.row(g).begin());
      --counts[result.assignment[far]];
      result.assignment[far] = g;
      counts[g] = 1;
    }
    double shift = 0.0;
    for (std::size_t g = 0; g < groups; ++g) shift = std::max(shift, std::sqrt(sq_dist(next.row(g), centroids.row(g))));
    centroids = std::move(next);

    previous = result.assignment;
    result.inertia = assign_points(points, centroids, result.assignment, dist);
    result.inertia_history.push_back(result.inertia);
    result.iterations = it + 1;
    if (previous == result.assignment || shift < tol) break;
  }
  result.centroids = std::move(centroids);
  return result;
}

ClusterAssignment kmeans(const EmbeddingMatrix& embeddings, const KMeansOptions& options) {
  const Tensor2& raw = embeddings.rows;
  if (raw.rows() == 0 || raw.cols() == 0) fail(ErrorKind::Invalid, "kmeans: empty embedding matrix");
  require(options.groups >= 1, "kmeans: need at least one group");
  if (options.groups > raw.rows()) {
    std::ostringstream os;
    os << "kmeans: " << options.groups << " groups requested for " << raw.rows() << " documents";
    fail(ErrorKind::Invalid, os.str());
  }
  if (!raw.all_finite()) fail(ErrorKind::Numeric, "kmeans: embeddings contain non-finite values");
  const Tensor2 points = options.l2_normalize ? l2_normalize_rows(raw) : raw;
  Rng rng = make_stream(options.seed, "clustering");
  Tensor2 seeds = kmeanspp_seeds(points, options.groups, rng);
  return kmeans_from_centroids(points, std::move(seeds), options.max_iters, options.tol);
}

ClusterAssignment assignment_from_ids(const std::vector<long long>& ids) {
  ClusterAssignment a;
  a.assignment.reserve(ids.size());
  long long max_id = -1;
  for (auto id : ids) {
    if (id < 0) fail(ErrorKind::Format, "cluster ids must be non-negative, got " + std::to_string(id));
    max_id = std::max(max_id, id);
    a.assignment.push_back(static_cast<std::size_t>(id));
  }
  a.groups = static_cast<std::size_t>(max_id + 1);
  return a;
}

ClusterAssignment singleton_assignment(std::size_t num_docs) {
  ClusterAssignment a;
  a.groups = num_docs;
  a.assignment.resize(num_docs);
  for (std::size_t d = 0; d < num_docs; ++d) a.assignment[d] = d;
  return a;
}

namespace {

void check_alignment(const BowCorpus& corpus, const ClusterAssignment& assignment) {
  if (assignment.assignment.size() != corpus.num_docs()) {
    std::ostringstream os;
    os << "cluster assignment covers " << assignment.assignment.size() << " documents, corpus has "
       << corpus.num_docs();
    fail(ErrorKind::Invalid, os.str());
  }
  for (auto g : assignment.assignment) {
    require(g < assignment.groups, "cluster id " + std::to_string(g) + " exceeds group count");
  }
}

}  // namespace

std::vector<SparseDoc> build_global_docs(const BowCorpus& corpus, const ClusterAssignment& assignment,
                                         std::vector<std::string>* warnings) {
  check_alignment(corpus, assignment);
  std::vector<std::vector<std::uint64_t>> dense(assignment.groups);
  std::vector<std::size_t> members(assignment.groups, 0);
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    auto& acc = dense[assignment.assignment[d]];
    if (acc.empty()) acc.assign(corpus.vocab_size(), 0);
    ++members[assignment.assignment[d]];
    for (const auto& e : corpus.doc(d)) acc[e.word] += e.count;
  }
  std::vector<SparseDoc> global(assignment.groups);
  for (std::size_t g = 0; g < assignment.groups; ++g) {
    if (members[g] == 0) {
      if (warnings) warnings->push_back("cluster " + std::to_string(g) + " has no documents");
      continue;
    }
    for (std::size_t v = 0; v < dense[g].size(); ++v) {
      if (dense[g][v] > 0) global[g].push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(dense[g][v])});
    }
    dense[g].clear();
    dense[g].shrink_to_fit();
  }
  return global;
}

std::vector<RealSparseDoc> build_augmented_docs(const BowCorpus& corpus,
                                                const std::vector<SparseDoc>& global_docs,
                                                const ClusterAssignment& assignment, double eta) {
  require(eta >= 0.0, "augmentation coefficient eta must be non-negative");
  check_alignment(corpus, assignment);
  require(global_docs.size() == assignment.groups, "global document count differs from group count");
  std::vector<RealSparseDoc> out(corpus.num_docs());
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    const auto& local = corpus.doc(d);
    auto& aug = out[d];
    if (eta == 0.0) {
      for (const auto& e : local) aug.emplace_back(e.word, static_cast<double>(e.count));
      continue;
    }
    const auto& global = global_docs[assignment.assignment[d]];
    // merge of two word-sorted sparse vectors
    std::size_t i = 0, j = 0;
    while (i < local.size() || j < global.size()) {
      if (j == global.size() || (i < local.size() && local[i].word < global[j].word)) {
        aug.emplace_back(local[i].word, static_cast<double>(local[i].count));
        ++i;
      } else if (i == local.size() || global[j].word < local[i].word) {
        aug.emplace_back(global[j].word, eta * global[j].count);
        ++j;
      } else {
        aug.emplace_back(local[i].word, local[i].count + eta * global[j].count);
        ++i;
        ++j;
      }
    }
  }
  return out;
}

GlobalCorpus aggregate(const BowCorpus& corpus, const ClusterAssignment& assignment, double eta,
                       std::vector<std::string>* warnings) {
  GlobalCorpus gc;
  gc.global_docs = build_global_docs(corpus, assignment, warnings);
  gc.augmented_docs = build_augmented_docs(corpus, gc.global_docs, assignment, eta);
  gc.eta = eta;
  return gc;
}

}  // namespace glocom
