#include "glocom/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "glocom/error.hpp"

namespace glocom {

Tensor2 compute_beta(const Tensor2& word_embeddings, const Tensor2& topic_embeddings, double tau) {
  require(tau > 0.0, "compute_beta: temperature must be positive");
  Tensor2 logits = pairwise_sq_dist(word_embeddings, topic_embeddings);
  for (double& v : logits.values()) v = -v / tau;
  return softmax_rows(logits);
}

void compute_beta_backward(const Tensor2& word_embeddings, const Tensor2& topic_embeddings,
                           const Tensor2& beta, const Tensor2& d_beta, double tau,
                           Tensor2& grad_words, Tensor2& grad_topics) {
  Tensor2 d_dist = softmax_rows_backward(beta, d_beta);
  for (double& v : d_dist.values()) v = -v / tau;
  pairwise_sq_dist_backward(word_embeddings, topic_embeddings, d_dist, grad_words, grad_topics);
}

Encoder::Encoder(std::size_t input_dim, std::size_t hidden, std::size_t latent)
    : hidden1_(input_dim, hidden), hidden2_(hidden, hidden), mean_(hidden, latent), log_var_(hidden, latent) {}

void Encoder::init(Rng& rng) {
  hidden1_.init_uniform(rng);
  hidden2_.init_uniform(rng);
  mean_.init_uniform(rng);
  log_var_.init_uniform(rng);
}

Encoder::Cache Encoder::forward(const Tensor2& normalized_input) const {
  Cache c;
  c.input = normalized_input;
  c.a1 = hidden1_.forward(c.input);
  c.h1 = softplus_forward(c.a1);
  c.a2 = hidden2_.forward(c.h1);
  c.h2 = softplus_forward(c.a2);
  c.mu = mean_.forward(c.h2);
  c.log_var_raw = log_var_.forward(c.h2);
  c.log_var = clamp_log_var(c.log_var_raw);
  return c;
}

std::pair<std::vector<double>, std::vector<double>> Encoder::encode(std::span<const double> normalized_input) const {
  require(normalized_input.size() == hidden1_.in_dim(), "encode: input dimension differs from vocabulary size");
  Tensor2 x(1, normalized_input.size(), std::vector<double>(normalized_input.begin(), normalized_input.end()));
  Cache c = forward(x);
  auto mu = c.mu.row(0);
  auto lv = c.log_var.row(0);
  return {{mu.begin(), mu.end()}, {lv.begin(), lv.end()}};
}

void Encoder::backward(const Cache& c, const Tensor2& d_mu, const Tensor2& d_log_var) {
  Tensor2 d_h2 = mean_.backward(c.h2, d_mu);
  Tensor2 d_h2_lv = log_var_.backward(c.h2, clamp_log_var_backward(c.log_var_raw, d_log_var));
  auto acc = d_h2.values();
  auto add = d_h2_lv.values();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
  Tensor2 d_h1 = hidden2_.backward(c.h1, softplus_backward(c.a2, d_h2));
  hidden1_.backward(c.input, softplus_backward(c.a1, d_h1), /*want_input_grad=*/false);
}

void Encoder::zero_grad() {
  hidden1_.zero_grad();
  hidden2_.zero_grad();
  mean_.zero_grad();
  log_var_.zero_grad();
}

void Encoder::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  hidden1_.append_params(prefix + ".hidden1", out);
  hidden2_.append_params(prefix + ".hidden2", out);
  mean_.append_params(prefix + ".mean", out);
  log_var_.append_params(prefix + ".log_var", out);
}

GlocomModel::GlocomModel(const ModelShape& shape, const ModelOptions& options)
    : shape_(shape),
      options_(options),
      phi_(shape.vocab_size, shape.hidden_width, shape.num_topics),
      gamma_(shape.vocab_size, shape.hidden_width, shape.num_topics) {
  require(shape.vocab_size > 0 && shape.num_topics > 0 && shape.embed_dim > 0 && shape.hidden_width > 0,
          "GlocomModel: all dimensions must be positive");
  require(options.tau > 0.0, "GlocomModel: tau must be positive");
  require(options.epsilon > 0.0, "GlocomModel: epsilon must be positive");
  space_.word_embeddings = Tensor2(shape.vocab_size, shape.embed_dim);
  space_.topic_embeddings = Tensor2(shape.num_topics, shape.embed_dim);
  space_.grad_words = Tensor2(shape.vocab_size, shape.embed_dim);
  space_.grad_topics = Tensor2(shape.num_topics, shape.embed_dim);
  space_.tau = options.tau;
}

void GlocomModel::initialize(Rng& rng, const Tensor2* word_init) {
  if (word_init) {
    require_shape(*word_init, shape_.vocab_size, shape_.embed_dim, "word embedding init");
    space_.word_embeddings = *word_init;
  } else {
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (double& v : space_.word_embeddings.values()) v = u(rng);
  }
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : space_.topic_embeddings.values()) v = n(rng);
  phi_.init(rng);
  gamma_.init(rng);
}

Tensor2 GlocomModel::beta() const {
  return compute_beta(space_.word_embeddings, space_.topic_embeddings, options_.tau);
}

std::vector<ParamRef> GlocomModel::params() {
  std::vector<ParamRef> out;
  out.push_back({"word_embeddings", &space_.word_embeddings, &space_.grad_words});
  out.push_back({"topic_embeddings", &space_.topic_embeddings, &space_.grad_topics});
  phi_.append_params("phi", out);
  gamma_.append_params("gamma", out);
  return out;
}

void GlocomModel::zero_grad() {
  space_.grad_words.fill(0.0);
  space_.grad_topics.fill(0.0);
  phi_.zero_grad();
  gamma_.zero_grad();
}

void GlocomModel::snap_to_storage_precision() {
  for (auto& p : params()) {
    for (double& v : p.value->values()) v = static_cast<float>(v);
  }
}

std::vector<double> normalize_bow(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (!(total > 0.0)) fail(ErrorKind::Invalid, "encoder input has zero total count");
  std::vector<double> out(counts.begin(), counts.end());
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> combine(std::span<const double> theta_g, std::span<const double> rho) {
  require(theta_g.size() == rho.size(), "combine: dimension mismatch");
  Tensor2 z(1, theta_g.size());
  for (std::size_t k = 0; k < theta_g.size(); ++k) z(0, k) = theta_g[k] * rho[k];
  Tensor2 y = softmax_rows(z);
  return {y.values().begin(), y.values().end()};
}

double elbo_per_doc(std::span<const double> x_aug, std::span<const double> theta_gd, const Tensor2& beta,
                    double kl_global_share, double kl_local) {
  require(x_aug.size() == beta.rows() && theta_gd.size() == beta.cols(), "elbo_per_doc: shape mismatch");
  Tensor2 theta(1, theta_gd.size(), std::vector<double>(theta_gd.begin(), theta_gd.end()));
  const Tensor2 logp = log_softmax_rows(matmul_bt(theta, beta));
  double recon = 0.0;
  for (std::size_t v = 0; v < x_aug.size(); ++v) {
    if (x_aug[v] != 0.0) recon -= x_aug[v] * logp(0, v);
  }
  return recon + kl_global_share + kl_local;
}

namespace {

void put_normalized(std::span<double> row, const SparseDoc& doc) {
  double total = 0.0;
  for (const auto& e : doc) total += e.count;
  if (!(total > 0.0)) fail(ErrorKind::Invalid, "encoder input has zero total count");
  for (const auto& e : doc) row[e.word] = e.count / total;
}

}  // namespace

Batch make_batch(const BowCorpus& corpus, const ClusterAssignment& assignment, const GlobalCorpus& global,
                 std::span<const std::size_t> docs) {
  const std::size_t vocab = corpus.vocab_size();
  require(assignment.assignment.size() == corpus.num_docs(), "make_batch: assignment does not cover corpus");
  require(global.augmented_docs.size() == corpus.num_docs(), "make_batch: augmented documents do not cover corpus");
  Batch b;
  b.docs.assign(docs.begin(), docs.end());
  std::vector<std::size_t> slot_of(assignment.groups, static_cast<std::size_t>(-1));
  for (auto d : b.docs) {
    require(d < corpus.num_docs(), "make_batch: document index out of range");
    const auto g = assignment.assignment[d];
    if (g >= global.global_docs.size()) {
      fail(ErrorKind::Invalid, "make_batch: no global document for cluster " + std::to_string(g));
    }
    if (slot_of[g] == static_cast<std::size_t>(-1)) {
      slot_of[g] = b.clusters.size();
      b.clusters.push_back(g);
    }
    b.cluster_slot.push_back(slot_of[g]);
  }
  b.local_input = Tensor2(b.docs.size(), vocab);
  b.target = Tensor2(b.docs.size(), vocab);
  for (std::size_t i = 0; i < b.docs.size(); ++i) {
    put_normalized(b.local_input.row(i), corpus.doc(b.docs[i]));
    auto t = b.target.row(i);
    for (const auto& [w, v] : global.augmented_docs[b.docs[i]]) t[w] = v;
  }
  b.global_input = Tensor2(b.clusters.size(), vocab);
  for (std::size_t c = 0; c < b.clusters.size(); ++c) {
    put_normalized(b.global_input.row(c), global.global_docs[b.clusters[c]]);
  }
  return b;
}

BatchNoise draw_noise(const Batch& batch, std::size_t num_topics, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  BatchNoise noise{Tensor2(batch.clusters.size(), num_topics), Tensor2(batch.docs.size(), num_topics)};
  for (double& v : noise.global.values()) v = n(rng);
  for (double& v : noise.local.values()) v = n(rng);
  return noise;
}

BatchNoise zero_noise(const Batch& batch, std::size_t num_topics) {
  return {Tensor2(batch.clusters.size(), num_topics), Tensor2(batch.docs.size(), num_topics)};
}

TmForward corpus_loss(GlocomModel& model, const Batch& batch, const BatchNoise& noise, bool accumulate_grads) {
  const std::size_t n_docs = batch.docs.size();
  const std::size_t n_clusters = batch.clusters.size();
  const std::size_t n_topics = model.shape().num_topics;
  const auto& opts = model.options();
  require(n_docs > 0, "corpus_loss: empty batch");
  require_shape(noise.global, n_clusters, n_topics, "global noise");
  require_shape(noise.local, n_docs, n_topics, "local noise");
  const double inv_b = 1.0 / static_cast<double>(n_docs);

  auto& space = model.space();
  const Tensor2 beta = model.beta();

  // global branch: α^g ~ N(μ_φ, Σ_φ), θ^g = softmax(α^g)
  const Encoder::Cache gcache = model.global_encoder().forward(batch.global_input);
  const Tensor2 alpha = gaussian_reparameterize(gcache.mu, gcache.log_var, noise.global);
  const Tensor2 theta_g = softmax_rows(alpha);

  // local branch: ρ_d ~ N(μ_γ, Σ_γ)
  Encoder::Cache lcache;
  Tensor2 rho(n_docs, n_topics, 1.0);
  if (opts.adaptive) {
    lcache = model.local_encoder().forward(batch.local_input);
    rho = gaussian_reparameterize(lcache.mu, lcache.log_var, noise.local);
  }

  Tensor2 z(n_docs, n_topics);
  for (std::size_t i = 0; i < n_docs; ++i) {
    auto tg = theta_g.row(batch.cluster_slot[i]);
    for (std::size_t k = 0; k < n_topics; ++k) z(i, k) = tg[k] * rho(i, k);
  }
  const Tensor2 theta_gd = softmax_rows(z);
  const Tensor2 logp = log_softmax_rows(matmul_bt(theta_gd, beta));

  std::vector<std::size_t> members(n_clusters, 0);
  for (auto s : batch.cluster_slot) ++members[s];

  TmForward out;
  out.per_doc.resize(n_docs);
  out.latent.kl_global.resize(n_clusters);
  out.latent.kl_local.assign(n_docs, 0.0);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    out.latent.kl_global[c] = opts.kl_weight * kl_diag_gaussian(gcache.mu.row(c), gcache.log_var.row(c), 0.0, 1.0);
  }
  std::vector<double> target_mass(n_docs, 0.0);
  for (std::size_t i = 0; i < n_docs; ++i) {
    double recon = 0.0;
    auto t = batch.target.row(i);
    auto lp = logp.row(i);
    for (std::size_t v = 0; v < t.size(); ++v) {
      if (t[v] == 0.0) continue;
      recon -= t[v] * lp[v];
      target_mass[i] += t[v];
    }
    const std::size_t s = batch.cluster_slot[i];
    const double share = opts.kl_attribution == KlAttribution::EqualShare
                             ? out.latent.kl_global[s] / static_cast<double>(members[s])
                             : out.latent.kl_global[s];
    if (opts.adaptive) {
      out.latent.kl_local[i] =
          opts.kl_weight * kl_diag_gaussian(lcache.mu.row(i), lcache.log_var.row(i), 1.0, opts.epsilon);
    }
    out.per_doc[i] = recon + share + out.latent.kl_local[i];
    out.loss.reconstruction += recon * inv_b;
    out.loss.kl_global += share * inv_b;
    out.loss.kl_local += out.latent.kl_local[i] * inv_b;
  }
  out.loss.total = out.loss.reconstruction + out.loss.kl_global + out.loss.kl_local;

  if (accumulate_grads) {
    // d/dlogits of −x̃ᵀ log softmax = S·p − x̃, S = Σ x̃
    Tensor2 d_logits(n_docs, beta.rows());
    for (std::size_t i = 0; i < n_docs; ++i) {
      auto lp = logp.row(i);
      auto t = batch.target.row(i);
      auto dl = d_logits.row(i);
      for (std::size_t v = 0; v < dl.size(); ++v) dl[v] = inv_b * (target_mass[i] * std::exp(lp[v]) - t[v]);
    }
    const Tensor2 d_theta_gd = matmul(d_logits, beta);
    Tensor2 d_beta(beta.rows(), beta.cols());
    add_at_b(d_beta, d_logits, theta_gd);
    compute_beta_backward(space.word_embeddings, space.topic_embeddings, beta, d_beta, opts.tau,
                          space.grad_words, space.grad_topics);

    const Tensor2 d_z = softmax_rows_backward(theta_gd, d_theta_gd);
    Tensor2 d_theta_g(n_clusters, n_topics);
    Tensor2 d_rho(n_docs, n_topics);
    for (std::size_t i = 0; i < n_docs; ++i) {
      const std::size_t s = batch.cluster_slot[i];
      for (std::size_t k = 0; k < n_topics; ++k) {
        d_theta_g(s, k) += d_z(i, k) * rho(i, k);
        d_rho(i, k) = d_z(i, k) * theta_g(s, k);
      }
    }

    const Tensor2 d_alpha = softmax_rows_backward(theta_g, d_theta_g);
    Tensor2 d_mu_g(n_clusters, n_topics), d_lv_g(n_clusters, n_topics);
    gaussian_reparameterize_backward(gcache.log_var, noise.global, d_alpha, d_mu_g, d_lv_g);
    for (std::size_t c = 0; c < n_clusters; ++c) {
      const double weight = opts.kl_weight * (opts.kl_attribution == KlAttribution::EqualShare
                                                  ? inv_b
                                                  : inv_b * static_cast<double>(members[c]));
      kl_diag_gaussian_grad(gcache.mu.row(c), gcache.log_var.row(c), 0.0, 1.0, weight, d_mu_g.row(c),
                            d_lv_g.row(c));
    }
    model.global_encoder().backward(gcache, d_mu_g, d_lv_g);

    if (opts.adaptive) {
      Tensor2 d_mu_l(n_docs, n_topics), d_lv_l(n_docs, n_topics);
      gaussian_reparameterize_backward(lcache.log_var, noise.local, d_rho, d_mu_l, d_lv_l);
      for (std::size_t i = 0; i < n_docs; ++i) {
        kl_diag_gaussian_grad(lcache.mu.row(i), lcache.log_var.row(i), 1.0, opts.epsilon, opts.kl_weight * inv_b,
                              d_mu_l.row(i),
                              d_lv_l.row(i));
      }
      model.local_encoder().backward(lcache, d_mu_l, d_lv_l);
    }
  }

  out.latent.theta_g = theta_g;
  out.latent.rho = std::move(rho);
  out.latent.theta_gd = theta_gd;
  return out;
}

std::vector<std::size_t> top_words(const Tensor2& beta, std::size_t k, std::size_t n) {
  std::vector<std::size_t> ids(beta.rows());
  std::iota(ids.begin(), ids.end(), 0);
  n = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (beta(a, k) != beta(b, k)) return beta(a, k) > beta(b, k);
                      return a < b;
                    });
  ids.resize(n);
  return ids;
}

TopicModelOutput infer(const GlocomModel& model, const BowCorpus& corpus, const ClusterAssignment& assignment,
                       std::size_t top_n) {
  const std::size_t n_topics = model.shape().num_topics;
  if (corpus.vocab_size() != model.shape().vocab_size) {
    std::ostringstream os;
    os << "infer: corpus vocabulary size " << corpus.vocab_size() << " differs from model vocabulary size "
       << model.shape().vocab_size;
    fail(ErrorKind::Invalid, os.str());
  }
  const auto global_docs = build_global_docs(corpus, assignment);

  TopicModelOutput out;
  out.beta = model.beta();
  for (std::size_t k = 0; k < n_topics; ++k) out.top_words.push_back(top_words(out.beta, k, top_n));

  // θ^g = softmax(μ_φ(x^g)); clusters without documents get the uniform distribution.
  out.theta_global = Tensor2(assignment.groups, n_topics, 1.0 / static_cast<double>(n_topics));
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> live;
  for (std::size_t g = 0; g < assignment.groups; ++g) {
    if (!global_docs[g].empty()) live.push_back(g);
  }
  for (std::size_t start = 0; start < live.size(); start += kChunk) {
    const std::size_t end = std::min(live.size(), start + kChunk);
    Tensor2 input(end - start, corpus.vocab_size());
    for (std::size_t i = start; i < end; ++i) put_normalized(input.row(i - start), global_docs[live[i]]);
    const Tensor2 theta = softmax_rows(model.global_encoder().forward(input).mu);
    for (std::size_t i = start; i < end; ++i) {
      std::copy_n(theta.row(i - start).begin(), n_topics, out.theta_global.row(live[i]).begin());
    }
  }

  // θ^g_d = softmax(θ^g ⊙ μ_γ(x^d))
  out.theta_local = Tensor2(corpus.num_docs(), n_topics);
  for (std::size_t start = 0; start < corpus.num_docs(); start += kChunk) {
    const std::size_t end = std::min(corpus.num_docs(), start + kChunk);
    Tensor2 rho(end - start, n_topics, 1.0);
    if (model.options().adaptive) {
      Tensor2 input(end - start, corpus.vocab_size());
      for (std::size_t d = start; d < end; ++d) put_normalized(input.row(d - start), corpus.doc(d));
      rho = model.local_encoder().forward(input).mu;
    }
    Tensor2 z(end - start, n_topics);
    for (std::size_t d = start; d < end; ++d) {
      auto tg = out.theta_global.row(assignment.assignment[d]);
      for (std::size_t k = 0; k < n_topics; ++k) z(d - start, k) = tg[k] * rho(d - start, k);
    }
    const Tensor2 theta = softmax_rows(z);
    for (std::size_t d = start; d < end; ++d) {
      std::copy_n(theta.row(d - start).begin(), n_topics, out.theta_local.row(d).begin());
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, GlocomModel& model) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) fail(ErrorKind::Io, "cannot write checkpoint manifest in " + dir.string());
  const auto& s = model.shape();
  const auto& o = model.options();
  manifest.precision(17);
  manifest << "# glocom checkpoint\n";
  manifest << "vocab_size " << s.vocab_size << "\nnum_topics " << s.num_topics << "\nembed_dim " << s.embed_dim
           << "\nhidden_width " << s.hidden_width << "\ntau " << o.tau << "\nepsilon " << o.epsilon
           << "\nkl_attribution " << (o.kl_attribution == KlAttribution::EqualShare ? "equal" : "per_doc")
           << "\nadaptive " << (o.adaptive ? 1 : 0) << "\n";
  for (const auto& p : model.params()) {
    manifest << "tensor " << p.name << ' ' << p.value->rows() << ' ' << p.value->cols() << '\n';
    save_embeddings(dir / (p.name + ".gemb"), *p.value);
  }
}

GlocomModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) fail(ErrorKind::Io, "cannot open checkpoint manifest in " + dir.string());
  ModelShape shape;
  ModelOptions options;
  struct Entry {
    std::string name;
    std::size_t rows, cols;
  };
  std::vector<Entry> tensors;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "vocab_size") ls >> shape.vocab_size;
    else if (key == "num_topics") ls >> shape.num_topics;
    else if (key == "embed_dim") ls >> shape.embed_dim;
    else if (key == "hidden_width") ls >> shape.hidden_width;
    else if (key == "tau") ls >> options.tau;
    else if (key == "epsilon") ls >> options.epsilon;
    else if (key == "kl_attribution") {
      std::string v;
      ls >> v;
      options.kl_attribution = v == "per_doc" ? KlAttribution::PerDocument : KlAttribution::EqualShare;
    } else if (key == "adaptive") {
      int v = 1;
      ls >> v;
      options.adaptive = v != 0;
    } else if (key == "tensor") {
      Entry e;
      ls >> e.name >> e.rows >> e.cols;
      tensors.push_back(e);
    } else {
      fail(ErrorKind::Format, "checkpoint manifest: unknown key '" + key + "'");
    }
    if (ls.fail()) fail(ErrorKind::Format, "checkpoint manifest: malformed line '" + line + "'");
  }
  GlocomModel model(shape, options);
  auto params = model.params();
  if (params.size() != tensors.size()) fail(ErrorKind::Format, "checkpoint manifest: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = tensors[i];
    if (e.name != params[i].name || e.rows != params[i].value->rows() || e.cols != params[i].value->cols()) {
      fail(ErrorKind::Format, "checkpoint manifest: tensor '" + e.name + "' does not match model layout (" +
                                  params[i].name + " " + params[i].value->shape_str() + ")");
    }
    auto m = load_embeddings(dir / (e.name + ".gemb"), e.rows);
    if (m.rows.cols() != e.cols) fail(ErrorKind::Format, "checkpoint tensor '" + e.name + "' has wrong width");
    *params[i].value = std::move(m.rows);
  }
  return model;
}

}  // namespace glocom
