#include <doctest.h>

#include <numeric>

#include "glocom/error.hpp"
#include "glocom/synthetic.hpp"
#include "glocom/trainer.hpp"
#include "support.hpp"

using namespace glocom;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.K = 3;
  c.G = 3;
  c.epochs = 3;
  c.batch_size = 8;
  c.hidden_width = 8;
  c.embed_dim = 5;
  c.seed = 5;
  c.lr = 0.01;
  return c;
}

struct Setup {
  BowCorpus corpus;
  ClusterAssignment clusters;
};

Setup tiny_setup(std::uint64_t seed = 1) {
  Rng rng(seed);
  Setup s;
  std::vector<int> labels(20);
  for (std::size_t d = 0; d < 20; ++d) labels[d] = static_cast<int>(d % 3);
  BowCorpus c = testing::random_corpus(15, 20, rng);
  c.set_labels(labels);
  s.corpus = std::move(c);
  std::vector<long long> ids(20);
  for (std::size_t d = 0; d < 20; ++d) ids[d] = static_cast<long long>(d % 3);
  s.clusters = assignment_from_ids(ids);
  return s;
}

}  // namespace

TEST_CASE("config validation and ablation switches") {
  TrainConfig c = tiny_config();
  CHECK_NOTHROW(validate(c));
  c.K = 0;
  CHECK_THROWS_AS(validate(c), Error);
  c = tiny_config();
  c.lr = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = tiny_config();
  c.eta = -0.1;
  CHECK_THROWS_AS(validate(c), Error);

  c = tiny_config();
  c.eta = 0.4;
  CHECK(effective_eta(c) == 0.4);
  c.ablation = Ablation::NoAugmentation;
  CHECK(effective_eta(c) == 0.0);

  c = tiny_config();
  c.ablation = Ablation::NoClustering;
  c.noc_mode = NocMode::Direct;
  CHECK(!model_options(c).adaptive);
  c.noc_mode = NocMode::Singleton;
  CHECK(model_options(c).adaptive);
}

TEST_CASE("no-clustering ablation uses each document as its own global document") {
  const Setup s = tiny_setup();
  TrainConfig c = tiny_config();
  c.ablation = Ablation::NoClustering;
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  CHECK(data.assignment.groups == 20);
  for (std::size_t d = 0; d < 20; ++d) CHECK(data.global.global_docs[data.assignment.assignment[d]] == s.corpus.doc(d));

  c.ablation = Ablation::Full;
  const TrainingData full = prepare_training_data(s.corpus, s.clusters, c);
  CHECK(full.assignment.assignment == s.clusters.assignment);
  CHECK(full.global.eta == c.eta);
}

TEST_CASE("zero epochs leave the initialization untouched") {
  const Setup s = tiny_setup();
  TrainConfig c = tiny_config();
  c.epochs = 0;
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  TrainResult r = train(s.corpus, data, c);
  CHECK(r.report.trajectory.empty());

  GlocomModel fresh(ModelShape{15, 3, 5, 8}, model_options(c));
  Rng init = make_stream(c.seed, "init");
  fresh.initialize(init);
  fresh.snap_to_storage_precision();
  auto a = r.model.params();
  auto b = fresh.params();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].value == *b[i].value);
}

TEST_CASE("training is deterministic given the seed") {
  const Setup s = tiny_setup();
  const TrainConfig c = tiny_config();
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  const TrainResult a = train(s.corpus, data, c);
  const TrainResult b = train(s.corpus, data, c);
  CHECK(a.report.trajectory == b.report.trajectory);
  CHECK(a.report.trajectory.size() == 3);
  for (const auto& e : a.report.trajectory) {
    CHECK(std::isfinite(e.total));
    CHECK(e.total == doctest::Approx(e.reconstruction + e.kl_global + e.kl_local + c.lambda_ecr * e.ecr));
  }

  TrainConfig other = c;
  other.seed = 6;
  CHECK(train(s.corpus, prepare_training_data(s.corpus, s.clusters, other), other).report.trajectory !=
        a.report.trajectory);
}

TEST_CASE("NoA ablation matches a full run with eta = 0") {
  const Setup s = tiny_setup();
  TrainConfig noa = tiny_config();
  noa.eta = 0.5;
  noa.ablation = Ablation::NoAugmentation;
  TrainConfig zero = tiny_config();
  zero.eta = 0.0;
  const auto a = train(s.corpus, prepare_training_data(s.corpus, s.clusters, noa), noa);
  const auto b = train(s.corpus, prepare_training_data(s.corpus, s.clusters, zero), zero);
  CHECK(a.report.trajectory == b.report.trajectory);
}

TEST_CASE("objective with lambda = 0 is the topic-model loss") {
  const Setup s = tiny_setup();
  const TrainConfig c = tiny_config();
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  GlocomModel model(ModelShape{15, 3, 5, 8}, model_options(c));
  Rng rng(3);
  model.initialize(rng);
  std::vector<std::size_t> docs(20);
  std::iota(docs.begin(), docs.end(), 0);
  const Batch batch = make_batch(s.corpus, data.assignment, data.global, docs);
  const BatchNoise noise = draw_noise(batch, 3, rng);
  const TransportPlan plan = current_plan(model, 0.5, EcrConfig{});
  const ObjectiveValue v = glocom_objective(model, batch, noise, &plan.psi, 0.0, false);
  CHECK(v.total == corpus_loss(model, batch, noise, false).loss.total);
  CHECK(v.total == v.tm.total);
}

TEST_CASE("full objective gradients match finite differences") {
  const Setup s = tiny_setup(4);
  TrainConfig c = tiny_config();
  c.epsilon = 0.1;
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  GlocomModel model(ModelShape{15, 3, 5, 8}, model_options(c));
  Rng rng(9);
  model.initialize(rng);
  for (double& v : model.space().word_embeddings.values()) v *= 10.0;
  const Batch batch = make_batch(s.corpus, data.assignment, data.global, std::vector<std::size_t>{0, 1, 2, 5, 7});
  const BatchNoise noise = draw_noise(batch, 3, rng);
  const Tensor2 psi = current_plan(model, 0.3, EcrConfig{}).psi;

  model.zero_grad();
  glocom_objective(model, batch, noise, &psi, 20.0, true);
  auto f = [&] { return glocom_objective(model, batch, noise, &psi, 20.0, false).total; };
  for (auto& p : model.params()) {
    const Tensor2 analytic = *p.grad;
    INFO(p.name);
    CHECK(testing::max_rel_error(analytic, testing::numeric_grad(f, *p.value), 1e-4) < 1e-4);
  }
}

TEST_CASE("checkpoint round trip preserves inference bit for bit") {
  testing::TempDir dir("trainer_ckpt");
  const Setup s = tiny_setup();
  const TrainConfig c = tiny_config();
  const TrainingData data = prepare_training_data(s.corpus, s.clusters, c);
  TrainResult r = train(s.corpus, data, c);
  const TopicModelOutput before = infer(r.model, s.corpus, data.assignment, 5);
  save_checkpoint(dir.path(), r.model);
  const GlocomModel back = load_checkpoint(dir.path());
  const TopicModelOutput after = infer(back, s.corpus, data.assignment, 5);
  CHECK(after.beta == before.beta);
  CHECK(after.theta_global == before.theta_global);
  CHECK(after.theta_local == before.theta_local);
  CHECK(after.top_words == before.top_words);
}

TEST_CASE("epoch loss falls over the first ten epochs on synthetic data") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SyntheticSpec spec;
    spec.D = 400;
    spec.seed = seed;
    const SyntheticData data = generate(spec);
    KMeansOptions ko;
    ko.groups = 5;
    ko.seed = seed;
    const ClusterAssignment clusters = kmeans(EmbeddingMatrix{data.doc_embeddings, EmbeddingSource::PrecomputedFile}, ko);
    TrainConfig c;
    c.K = 5;
    c.G = 5;
    c.epochs = 10;
    c.seed = seed;
    const TrainResult r = train(data.corpus, prepare_training_data(data.corpus, clusters, c), c);
    wins += r.report.trajectory.back().total < r.report.trajectory.front().total;
  }
  CHECK(wins >= 2);
}

TEST_CASE("grid search") {
  const Setup s = tiny_setup();
  TrainConfig c = tiny_config();
  c.epochs = 1;

  const GridReport single = grid_search(s.corpus, s.clusters, c, {{"eta", {0.3}}});
  REQUIRE(single.ranked.size() == 1);
  CHECK(single.ranked[0].point.at("eta") == 0.3);
  CHECK(single.ranked[0].config.eta == 0.3);
  CHECK(single.by_nmi);
  CHECK(single.ranked[0].nmi.has_value());

  const GridReport two = grid_search(s.corpus, s.clusters, c, {{"lambda_ecr", {20.0, 10.0, 20.0}}, {"eta", {0.1}}});
  CHECK(two.ranked.size() == 2);
  for (std::size_t i = 1; i < two.ranked.size(); ++i) CHECK(two.ranked[i - 1].objective >= two.ranked[i].objective);

  BowCorpus unlabeled(s.corpus.vocab_size(), s.corpus.docs());
  const GridReport by_loss = grid_search(unlabeled, s.clusters, c, {{"tau", {0.2, 0.5}}});
  CHECK(!by_loss.by_nmi);
  CHECK(by_loss.ranked[0].final_loss <= by_loss.ranked[1].final_loss);

  CHECK_THROWS_AS(grid_search(s.corpus, s.clusters, c, {}), Error);
  CHECK_THROWS_AS(grid_search(s.corpus, s.clusters, c, {{"bogus", {1.0}}}), Error);

  const auto grids = default_grids();
  CHECK(grids.at("eta").size() == 5);
  CHECK(grids.at("epsilon").size() == 3);
  CHECK(grids.at("lambda_ecr").size() == 5);
}
