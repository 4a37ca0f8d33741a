#include "glocom/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "glocom/error.hpp"
#include "glocom/eval.hpp"

namespace glocom {

void validate(const TrainConfig& c) {
  require(c.K >= 1, "config: K must be at least 1");
  require(c.G >= 1, "config: G must be at least 1");
  require(c.tau > 0.0, "config: tau must be positive");
  require(c.eta >= 0.0, "config: eta must be non-negative");
  require(c.epsilon > 0.0, "config: epsilon must be positive");
  require(c.lambda_ecr >= 0.0, "config: lambda_ecr must be non-negative");
  require(c.batch_size >= 1, "config: batch_size must be at least 1");
  require(c.lr > 0.0, "config: lr must be positive");
  require(c.hidden_width >= 1, "config: hidden_width must be at least 1");
  require(c.embed_dim >= 1, "config: embed_dim must be at least 1");
  require(c.top_n >= 1, "config: top_n must be at least 1");
  require(c.ecr.max_iters >= 1, "config: ecr.max_iters must be at least 1");
  require(c.ecr.tol > 0.0, "config: ecr.tol must be positive");
}

double effective_eta(const TrainConfig& config) {
  return config.ablation == Ablation::NoAugmentation ? 0.0 : config.eta;
}

ModelOptions model_options(const TrainConfig& config) {
  ModelOptions o;
  o.tau = config.tau;
  o.epsilon = config.epsilon;
  o.kl_attribution = config.kl_attribution;
  o.adaptive = !(config.ablation == Ablation::NoClustering && config.noc_mode == NocMode::Direct);
  return o;
}

TrainingData prepare_training_data(const BowCorpus& corpus, const ClusterAssignment& assignment,
                                   const TrainConfig& config) {
  TrainingData data;
  if (config.ablation == Ablation::NoClustering) {
    data.assignment = singleton_assignment(corpus.num_docs());
  } else {
    data.assignment = assignment;
  }
  data.global = aggregate(corpus, data.assignment, effective_eta(config), &data.warnings);
  if (config.ablation == Ablation::NoClustering) {
    for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
      if (data.global.global_docs[d] != corpus.doc(d)) {
        fail(ErrorKind::Invalid, "no-clustering setup: global document differs from local document " + std::to_string(d));
      }
    }
  }
  return data;
}

TransportPlan current_plan(const GlocomModel& model, double nu, const EcrConfig& ecr) {
  TransportProblem problem;
  problem.cost = pairwise_sq_dist(model.space().word_embeddings, model.space().topic_embeddings);
  problem.nu = nu;
  problem.max_iters = ecr.max_iters;
  problem.tol = ecr.tol;
  return sinkhorn(problem);
}

ObjectiveValue glocom_objective(GlocomModel& model, const Batch& batch, const BatchNoise& noise,
                                const Tensor2* psi, double lambda_ecr, bool accumulate_grads) {
  ObjectiveValue v;
  v.tm = corpus_loss(model, batch, noise, accumulate_grads).loss;
  v.total = v.tm.total;
  if (psi && lambda_ecr != 0.0) {
    auto& space = model.space();
    v.ecr = ecr_loss(space.word_embeddings, space.topic_embeddings, *psi);
    v.total += lambda_ecr * v.ecr;
    if (accumulate_grads) {
      ecr_loss_backward(space.word_embeddings, space.topic_embeddings, *psi, lambda_ecr, space.grad_words,
                        space.grad_topics);
    }
  }
  return v;
}

namespace {

void check_consistency(const BowCorpus& corpus, const TrainingData& data, const TrainConfig& config) {
  const auto& a = data.assignment;
  require(a.assignment.size() == corpus.num_docs(), "train: cluster assignment does not cover the corpus");
  require(data.global.global_docs.size() == a.groups, "train: global document count differs from group count");
  require(data.global.augmented_docs.size() == corpus.num_docs(), "train: augmented documents do not cover the corpus");
  if (config.ablation == Ablation::NoClustering) {
    require(a.groups == corpus.num_docs(), "train: the no-clustering ablation needs one cluster per document");
  }
  if (config.ablation == Ablation::NoAugmentation) {
    require(data.global.eta == 0.0, "train: the no-augmentation ablation needs eta = 0");
  }
}

std::string describe(const ObjectiveValue& v) {
  std::ostringstream os;
  os << "total=" << v.total << " reconstruction=" << v.tm.reconstruction << " kl_global=" << v.tm.kl_global
     << " kl_local=" << v.tm.kl_local << " ecr=" << v.ecr;
  return os.str();
}

}  // namespace

TrainResult train(const BowCorpus& corpus, const TrainingData& data, const TrainConfig& config,
                  const Tensor2* word_init) {
  validate(config);
  check_consistency(corpus, data, config);
  require(corpus.num_docs() > 0, "train: empty corpus");
  const auto started = std::chrono::steady_clock::now();

  ModelShape shape{corpus.vocab_size(), config.K, config.embed_dim, config.hidden_width};
  TrainResult result{GlocomModel(shape, model_options(config)), {}};
  GlocomModel& model = result.model;
  Rng init_rng = make_stream(config.seed, "init");
  model.initialize(init_rng, word_init);

  const bool use_ecr = config.lambda_ecr != 0.0;
  double nu = config.ecr.nu;
  if (use_ecr && nu <= 0.0) {
    nu = default_nu(pairwise_sq_dist(model.space().word_embeddings, model.space().topic_embeddings));
  }
  result.report.nu = nu;

  auto params = model.params();
  AdamState adam(AdamOptions{.lr = config.lr}, params);
  Rng train_rng = make_stream(config.seed, "training");
  std::vector<std::size_t> order(corpus.num_docs());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.kl_warmup_epochs > 0) {
      model.options().kl_weight =
          std::min(1.0, static_cast<double>(epoch + 1) / static_cast<double>(config.kl_warmup_epochs));
    }
    std::shuffle(order.begin(), order.end(), train_rng);
    EpochStats stats;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch = make_batch(corpus, data.assignment, data.global,
                                     std::span<const std::size_t>(order).subspan(start, end - start));
      const BatchNoise noise = draw_noise(batch, config.K, train_rng);
      std::optional<TransportPlan> plan;
      if (use_ecr) plan = current_plan(model, nu, config.ecr);

      model.zero_grad();
      const ObjectiveValue v =
          glocom_objective(model, batch, noise, plan ? &plan->psi : nullptr, config.lambda_ecr, true);
      if (!std::isfinite(v.total)) {
        fail(ErrorKind::Numeric, "train: non-finite loss at epoch " + std::to_string(epoch) + " (" + describe(v) + ")");
      }
      adam_step(params, adam);

      const double w = static_cast<double>(end - start) / static_cast<double>(order.size());
      stats.total += w * v.total;
      stats.reconstruction += w * v.tm.reconstruction;
      stats.kl_global += w * v.tm.kl_global;
      stats.kl_local += w * v.tm.kl_local;
      stats.ecr += w * v.ecr;
    }
    result.report.trajectory.push_back(stats);
  }
  model.options().kl_weight = 1.0;
  model.snap_to_storage_precision();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::map<std::string, std::vector<double>> default_grids() {
  return {
      {"eta", {0.01, 0.05, 0.1, 0.5, 1.0}},
      {"epsilon", {0.001, 0.01, 0.1}},
      {"lambda_ecr", {10, 20, 30, 60, 90}},
  };
}

namespace {

void set_grid_value(TrainConfig& c, const std::string& key, double value) {
  if (key == "eta") c.eta = value;
  else if (key == "epsilon") c.epsilon = value;
  else if (key == "lambda_ecr") c.lambda_ecr = value;
  else if (key == "tau") c.tau = value;
  else if (key == "lr") c.lr = value;
  else if (key == "K") c.K = static_cast<std::size_t>(value);
  else fail(ErrorKind::Invalid, "grid_search: unsupported grid key '" + key + "'");
}

}  // namespace

GridReport grid_search(const BowCorpus& corpus, const ClusterAssignment& assignment, const TrainConfig& base,
                       const std::map<std::string, std::vector<double>>& grids, const Tensor2* word_init) {
  require(!grids.empty(), "grid_search: no grid axes");
  std::vector<std::string> keys;
  std::vector<std::vector<double>> axes;
  for (const auto& [key, values] : grids) {
    require(!values.empty(), "grid_search: empty grid for '" + key + "'");
    keys.push_back(key);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    axes.push_back(std::move(sorted));
  }

  GridReport report;
  report.by_nmi = corpus.has_labels();
  std::vector<std::size_t> idx(keys.size(), 0);
  for (;;) {
    GridEntry entry;
    entry.config = base;
    for (std::size_t a = 0; a < keys.size(); ++a) {
      set_grid_value(entry.config, keys[a], axes[a][idx[a]]);
      entry.point[keys[a]] = axes[a][idx[a]];
    }
    const TrainingData data = prepare_training_data(corpus, assignment, entry.config);
    const TrainResult run = train(corpus, data, entry.config, word_init);
    entry.final_loss = run.report.trajectory.empty() ? 0.0 : run.report.trajectory.back().total;
    if (report.by_nmi) {
      const auto out = infer(run.model, corpus, data.assignment, entry.config.top_n);
      entry.nmi = nmi(argmax_rows(out.theta_local), corpus.labels());
      entry.objective = *entry.nmi;
    } else {
      entry.objective = entry.final_loss;
    }
    report.ranked.push_back(std::move(entry));

    // odometer over the axes, last key fastest
    std::size_t a = keys.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
      if (a == 0) {
        a = keys.size() + 1;
        break;
      }
    }
    if (a == keys.size() + 1) break;
  }

  std::stable_sort(report.ranked.begin(), report.ranked.end(), [&](const GridEntry& x, const GridEntry& y) {
    return report.by_nmi ? x.objective > y.objective : x.objective < y.objective;
  });
  return report;
}

}  // namespace glocom
