// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glocom/aggregation.hpp"
#include "glocom/ecr.hpp"
#include "glocom/eval.hpp"
#include "glocom/formats.hpp"
#include "glocom/model.hpp"
#include "glocom/synthetic.hpp"
#include "glocom/trainer.hpp"
#include "support.hpp"

using namespace glocom;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kFdStep = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradRelFloor = 1e-6;
constexpr double kGradSeconds = 10.0;
constexpr double kBetaTol = 1e-9;
constexpr int kBetaTrials = 100;
constexpr double kMarginalTol = 1e-6;
constexpr double kSinkhornSeconds = 5.0;
constexpr double kKlQuadTol = 1e-6;
constexpr int kKlQuadCases = 20;
constexpr int kKlNonnegCases = 10000;
constexpr double kCosineMin = 0.8;
constexpr int kGoodTopicsMin = 4;
constexpr double kPurityMin = 0.8;
constexpr double kRecoverySeconds = 600.0;
constexpr int kMetricInstances = 50;
constexpr double kNmiTol = 1e-9;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1. gradient check ----

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(7);
  BowCorpus corpus = testing::random_corpus(20, 6, rng);
  const ClusterAssignment clusters = assignment_from_ids({0, 1, 0, 1, 0, 1});
  TrainConfig c;
  c.K = 4;
  c.G = 2;
  c.embed_dim = 6;
  c.hidden_width = 8;
  c.epsilon = 0.1;
  c.seed = 7;
  const TrainingData data = prepare_training_data(corpus, clusters, c);
  GlocomModel model(ModelShape{20, 4, c.embed_dim, c.hidden_width}, model_options(c));
  Rng init = make_stream(7, "init");
  model.initialize(init);
  // spread the embeddings so β is far from uniform
  for (double& v : model.space().word_embeddings.values()) v *= 10.0;
  std::vector<std::size_t> docs(6);
  std::iota(docs.begin(), docs.end(), 0);
  const Batch batch = make_batch(corpus, data.assignment, data.global, docs);
  Rng noise_rng = make_stream(7, "training");
  const BatchNoise noise = draw_noise(batch, 4, noise_rng);
  const Tensor2 psi = current_plan(model, 0.5, EcrConfig{}).psi;

  model.zero_grad();
  glocom_objective(model, batch, noise, &psi, c.lambda_ecr, true);
  auto f = [&] { return glocom_objective(model, batch, noise, &psi, c.lambda_ecr, false).total; };
  double worst = 0.0;
  std::string worst_name;
  std::size_t tensors = 0;
  for (auto& p : model.params()) {
    const Tensor2 analytic = *p.grad;
    const double e = testing::max_rel_error(analytic, testing::numeric_grad(f, *p.value, kFdStep), kGradRelFloor);
    if (e > worst) {
      worst = e;
      worst_name = p.name;
    }
    ++tensors;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kGradRelTol && secs < kGradSeconds;
  o.detail = "max relative error " + fmt("%.3e", worst) + " (" + worst_name + ") over " + std::to_string(tensors) +
             " tensors, " + fmt("%.2f", secs) + " s";
  return o;
}

// ---- 2. β contract ----

Outcome beta_contract() {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> vk(2, 12), ld(1, 10);
  std::uniform_real_distribution<double> tau_d(0.05, 2.0), radius(0.1, 3.0);
  double worst_sum = 0.0, worst_uniform = 0.0;
  for (int trial = 0; trial < kBetaTrials; ++trial) {
    const std::size_t V = vk(rng) + 5, K = vk(rng), L = ld(rng);
    Tensor2 words = testing::random_tensor(V, L, rng, 2.0);
    Tensor2 topics = testing::random_tensor(K, L, rng, 2.0);
    // word 0 sits at the same distance r from every topic
    const double r = radius(rng);
    for (std::size_t k = 0; k < K; ++k) {
      Tensor2 dir = testing::random_tensor(1, L, rng);
      double n = 0.0;
      for (double v : dir.values()) n += v * v;
      n = std::sqrt(n);
      for (std::size_t j = 0; j < L; ++j) topics(k, j) = words(0, j) + r * dir(0, j) / n;
    }
    const Tensor2 beta = compute_beta(words, topics, tau_d(rng));
    for (std::size_t i = 0; i < V; ++i) {
      double s = 0.0;
      for (double v : beta.row(i)) s += v;
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
    for (double v : beta.row(0)) worst_uniform = std::max(worst_uniform, std::abs(v - 1.0 / static_cast<double>(K)));
  }
  Outcome o;
  o.pass = worst_sum <= kBetaTol && worst_uniform <= kBetaTol;
  o.detail = "max |row sum - 1| " + fmt("%.2e", worst_sum) + ", max deviation of equidistant row from uniform " +
             fmt("%.2e", worst_uniform) + " over " + std::to_string(kBetaTrials) + " trials";
  return o;
}

// ---- 3. Sinkhorn contract ----

Outcome sinkhorn_contract() {
  const auto t0 = Clock::now();
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    TransportProblem p;
    p.cost = Tensor2(50, 10);
    for (double& v : p.cost.values()) v = u(rng);
    p.nu = 0.1;
    p.max_iters = 5000;
    p.tol = 1e-9;
    const TransportPlan plan = sinkhorn(p);
    for (std::size_t i = 0; i < 50; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 10; ++j) s += plan.psi(i, j);
      worst = std::max(worst, std::abs(s - 1.0 / 50.0));
    }
    for (std::size_t j = 0; j < 10; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < 50; ++i) s += plan.psi(i, j);
      worst = std::max(worst, std::abs(s - 1.0 / 10.0));
    }
  }

  // 2×2: the feasible set is [[a, 1/2 − a], [1/2 − a, a]], a ∈ [0, 1/2]; the LP optimum is a vertex
  const Tensor2 cost(2, 2, {0.0, 1.0, 1.0, 0.0});
  double best_cost = std::numeric_limits<double>::infinity();
  Tensor2 lp;
  for (double a : {0.0, 0.5}) {
    const Tensor2 v(2, 2, {a, 0.5 - a, 0.5 - a, a});
    double c = 0.0;
    for (std::size_t i = 0; i < 4; ++i) c += cost.values()[i] * v.values()[i];
    if (c < best_cost) {
      best_cost = c;
      lp = v;
    }
  }
  std::vector<double> tv;
  for (double nu : {1.0, 0.1, 0.01}) {
    TransportProblem p;
    p.cost = cost;
    p.nu = nu;
    p.max_iters = 1000;
    p.tol = 1e-12;
    const Tensor2 psi = sinkhorn(p).psi;
    double d = 0.0;
    for (std::size_t i = 0; i < 4; ++i) d += std::abs(psi.values()[i] - lp.values()[i]);
    tv.push_back(0.5 * d);
  }
  const bool decreasing = tv[1] < tv[0] && tv[2] < tv[1];
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kMarginalTol && decreasing && secs < kSinkhornSeconds;
  std::ostringstream os;
  os << "max marginal error " << fmt("%.2e", worst) << " on 20 random 50x10 costs; 2x2 TV to LP optimum "
     << fmt("%.3e", tv[0]) << " > " << fmt("%.3e", tv[1]) << " > " << fmt("%.3e", tv[2]) << "; " << fmt("%.2f", secs)
     << " s";
  o.detail = os.str();
  return o;
}

// ---- 4. KL oracle ----

double kl_quadrature(double mq, double vq, double mp, double vp) {
  const double sq = std::sqrt(vq);
  const double lo = mq - 14.0 * sq, hi = mq + 14.0 * sq;
  const std::size_t n = 40000;  // even, composite Simpson
  const double h = (hi - lo) / static_cast<double>(n);
  auto f = [&](double x) {
    const double lq = -0.5 * std::log(2.0 * M_PI * vq) - (x - mq) * (x - mq) / (2.0 * vq);
    const double lp = -0.5 * std::log(2.0 * M_PI * vp) - (x - mp) * (x - mp) / (2.0 * vp);
    return std::exp(lq) * (lq - lp);
  };
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < n; ++i) s += f(lo + static_cast<double>(i) * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

Outcome kl_oracle() {
  Rng rng(44);
  std::uniform_real_distribution<double> mean(-2.0, 2.0), logvar(-2.0, 1.5), var(0.05, 3.0);
  double worst = 0.0;
  for (int c = 0; c < kKlQuadCases; ++c) {
    const double mq = mean(rng), lv = logvar(rng), mp = mean(rng), vp = var(rng);
    const double closed = kl_diag_gaussian(std::vector<double>{mq}, std::vector<double>{lv}, mp, vp);
    worst = std::max(worst, std::abs(closed - kl_quadrature(mq, std::exp(lv), mp, vp)));
  }
  std::uniform_int_distribution<std::size_t> dim(1, 20);
  std::uniform_real_distribution<double> wide(-5.0, 5.0), pv(1e-3, 10.0);
  double min_kl = std::numeric_limits<double>::infinity();
  for (int c = 0; c < kKlNonnegCases; ++c) {
    const std::size_t n = dim(rng);
    std::vector<double> mq(n), lv(n), mp(n);
    for (std::size_t i = 0; i < n; ++i) {
      mq[i] = wide(rng);
      lv[i] = wide(rng);
      mp[i] = wide(rng);
    }
    min_kl = std::min(min_kl, kl_diag_gaussian(mq, lv, mp, pv(rng)));
  }
  Outcome o;
  o.pass = worst <= kKlQuadTol && min_kl >= 0.0;
  o.detail = "max |closed form - quadrature| " + fmt("%.2e", worst) + " on " + std::to_string(kKlQuadCases) +
             " cases; min KL " + fmt("%.3e", min_kl) + " over " + std::to_string(kKlNonnegCases) + " cases";
  return o;
}

// ---- 5 and 6. synthetic recovery and ablation ordering ----

SyntheticSpec recovery_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.V = 100;
  s.K = 5;
  s.G = 5;
  s.D = 1000;
  s.doc_min = 4;
  s.doc_max = 12;
  s.epsilon_true = 0.01;
  s.seed = seed;
  return s;
}

struct RunResult {
  int good_topics = 0;
  double purity = 0.0;
  double nmi = 0.0;
  double td = 0.0;
  double seconds = 0.0;
  std::vector<double> cosines;
};

RunResult recovery_run(std::uint64_t seed, Ablation ablation) {
  const auto t0 = Clock::now();
  const SyntheticData data = generate(recovery_spec(seed));
  KMeansOptions ko;
  ko.groups = 5;
  ko.seed = seed;
  const ClusterAssignment clusters = kmeans(EmbeddingMatrix{data.doc_embeddings, EmbeddingSource::PrecomputedFile}, ko);
  TrainConfig c;
  c.K = 5;
  c.G = 5;
  c.eta = 0.1;
  c.lambda_ecr = 20.0;
  c.epochs = 200;
  c.seed = seed;
  c.ablation = ablation;
  const TrainResult r = train(data.corpus, prepare_training_data(data.corpus, clusters, c), c, &data.word_embeddings);
  const TrainingData td = prepare_training_data(data.corpus, clusters, c);
  const TopicModelOutput out = infer(r.model, data.corpus, td.assignment, c.top_n);

  RunResult res;
  res.cosines = match_topics(out.beta, data.truth.beta).cosine;
  for (double x : res.cosines) res.good_topics += x >= kCosineMin;
  const auto pred = argmax_rows(out.theta_local);
  res.purity = purity(pred, data.corpus.labels());
  res.nmi = nmi(pred, data.corpus.labels());
  TopicSet topics;
  for (const auto& ids : out.top_words) {
    std::vector<std::string> words;
    for (auto id : ids) words.push_back(data.vocab.word(id));
    topics.push_back(words);
  }
  res.td = topic_diversity(topics);
  res.seconds = seconds_since(t0);
  return res;
}

std::map<std::uint64_t, RunResult> g_full_runs;

Outcome synthetic_recovery() {
  int passing = 0;
  double total = 0.0;
  std::ostringstream os;
  for (auto seed : kSeeds) {
    const RunResult r = recovery_run(seed, Ablation::Full);
    g_full_runs[seed] = r;
    total += r.seconds;
    const bool ok = r.good_topics >= kGoodTopicsMin && r.purity >= kPurityMin && r.td == 1.0;
    passing += ok;
    os << "seed " << seed << ": " << r.good_topics << "/5 topics (cos";
    for (double x : r.cosines) os << " " << fmt("%.3f", x);
    os << "), purity " << fmt("%.3f", r.purity) << ", TD " << fmt("%.3f", r.td) << (ok ? " ok" : " miss") << "; ";
  }
  os << passing << "/3 seeds pass, " << fmt("%.1f", total) << " s";
  Outcome o;
  o.pass = 2 * passing > static_cast<int>(kSeeds.size()) && total < kRecoverySeconds;
  o.detail = os.str();
  return o;
}

Outcome ablation_ordering() {
  double full = 0.0, noc = 0.0, noa = 0.0;
  for (auto seed : kSeeds) {
    if (!g_full_runs.count(seed)) g_full_runs[seed] = recovery_run(seed, Ablation::Full);
    full += g_full_runs[seed].nmi;
    noc += recovery_run(seed, Ablation::NoClustering).nmi;
    noa += recovery_run(seed, Ablation::NoAugmentation).nmi;
  }
  const double n = static_cast<double>(kSeeds.size());
  full /= n;
  noc /= n;
  noa /= n;
  Outcome o;
  o.pass = full >= noc && full >= noa;
  o.detail = "mean NMI full " + fmt("%.4f", full) + ", NoC " + fmt("%.4f", noc) + ", NoA " + fmt("%.4f", noa);
  return o;
}

// ---- 7. metric oracles ----

double purity_brute(const std::vector<int>& pred, const std::vector<int>& gold) {
  std::set<int> clusters(pred.begin(), pred.end()), classes(gold.begin(), gold.end());
  int total = 0;
  for (int c : clusters) {
    int best = 0;
    for (int k : classes) {
      int n = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) n += pred[i] == c && gold[i] == k;
      best = std::max(best, n);
    }
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(pred.size());
}

double nmi_brute(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  double mi = 0.0, ha = 0.0, hb = 0.0;
  for (auto& [key, c] : joint) mi += (c / n) * std::log((c / n) / ((pa[key.first] / n) * (pb[key.second] / n)));
  for (auto& [k, c] : pa) ha -= (c / n) * std::log(c / n);
  for (auto& [k, c] : pb) hb -= (c / n) * std::log(c / n);
  const double denom = 0.5 * (ha + hb);
  return denom > 0.0 ? mi / denom : 0.0;
}

Outcome metric_oracles() {
  Rng rng(77);
  std::uniform_int_distribution<int> cl(0, 4), cls(0, 3);
  int purity_mismatch = 0;
  double worst_nmi = 0.0;
  for (int t = 0; t < kMetricInstances; ++t) {
    std::vector<int> pred(20), gold(20);
    for (auto& p : pred) p = cl(rng);
    for (auto& g : gold) g = cls(rng);
    purity_mismatch += purity(pred, gold) != purity_brute(pred, gold);
    worst_nmi = std::max(worst_nmi, std::abs(nmi(pred, gold) - nmi_brute(pred, gold)));
  }
  const bool td_ok = topic_diversity({{"a", "b", "c"}, {"d", "e", "f"}}) == 1.0 &&
                     topic_diversity({{"a", "b", "c"}, {"a", "d", "e"}}) == 5.0 / 6.0 &&
                     topic_diversity({{"a", "b"}, {"a", "b"}, {"a", "b"}}) == 2.0 / 6.0;
  Outcome o;
  o.pass = purity_mismatch == 0 && worst_nmi <= kNmiTol && td_ok;
  o.detail = std::to_string(purity_mismatch) + " purity mismatches, max NMI error " + fmt("%.2e", worst_nmi) +
             " on " + std::to_string(kMetricInstances) + " instances; TD hand cases " + (td_ok ? "exact" : "wrong");
  return o;
}

// ---- 8. determinism ----

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + GLOCOM_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_determinism() {
  testing::TempDir dir("acceptance_pipeline");
  write_text_file(dir / "pipeline.cfg",
                  "input=synthetic\nseed=0\nK=5\nG=5\neta=0.1\nlambda_ecr=20\nepochs=200\n"
                  "synth.V=100\nsynth.K=5\nsynth.G=5\nsynth.D=1000\nsynth.doc_min=4\nsynth.doc_max=12\n"
                  "synth.epsilon_true=0.01\nmin_freq=1\n");
  const auto t0 = Clock::now();
  const fs::path cfg = dir / "pipeline.cfg";
  const int a = run_cli("pipeline --config \"" + cfg.string() + "\" --out \"" + (dir / "a").string() + "\"", dir / "a.log");
  const int b = run_cli("pipeline --config \"" + cfg.string() + "\" --out \"" + (dir / "b").string() + "\"", dir / "b.log");
  Outcome o;
  if (a != 0 || b != 0) {
    o.detail = "pipeline exited with " + std::to_string(a) + " and " + std::to_string(b);
    return o;
  }
  const bool metrics_same = read_text_file(dir / "a" / "metrics.json") == read_text_file(dir / "b" / "metrics.json");
  const bool topics_same = read_text_file(dir / "a" / "topics.txt") == read_text_file(dir / "b" / "topics.txt");
  o.pass = metrics_same && topics_same;
  o.detail = std::string("metrics.json ") + (metrics_same ? "identical" : "differs") + ", topics.txt " +
             (topics_same ? "identical" : "differs") + ", " + fmt("%.1f", seconds_since(t0)) + " s for two runs";
  return o;
}

// ---- 9. aggregation conservation ----

Outcome aggregation_conservation() {
  std::vector<BowCorpus> corpora;
  Rng rng(99);
  for (int i = 0; i < 20; ++i) corpora.push_back(testing::random_corpus(5 + 7 * i % 40, 10 + 13 * i, rng));
  for (auto seed : kSeeds) corpora.push_back(generate(recovery_spec(seed)).corpus);

  std::size_t checks = 0, failures = 0;
  for (const auto& corpus : corpora) {
    const std::size_t D = corpus.num_docs(), V = corpus.vocab_size();
    std::vector<std::uint64_t> colsum(V, 0);
    for (const auto& doc : corpus.docs()) {
      for (const auto& e : doc) colsum[e.word] += e.count;
    }
    std::vector<ClusterAssignment> assignments{singleton_assignment(D)};
    for (std::size_t g : {std::size_t{1}, std::size_t{3}, std::min<std::size_t>(7, D)}) {
      std::vector<long long> ids(D);
      std::uniform_int_distribution<long long> pick(0, static_cast<long long>(g) - 1);
      for (std::size_t d = 0; d < D; ++d) ids[d] = d < g ? static_cast<long long>(d) : pick(rng);
      assignments.push_back(assignment_from_ids(ids));
    }
    KMeansOptions ko;
    ko.groups = std::min<std::size_t>(4, D);
    assignments.push_back(kmeans(tfidf(corpus), ko));

    for (const auto& a : assignments) {
      ++checks;
      const auto global = build_global_docs(corpus, a);
      std::vector<std::uint64_t> summed(V, 0);
      for (const auto& g : global) {
        for (const auto& e : g) summed[e.word] += e.count;
      }
      bool ok = summed == colsum;
      const auto aug = build_augmented_docs(corpus, global, a, 0.0);
      for (std::size_t d = 0; d < D && ok; ++d) {
        const auto& x = corpus.doc(d);
        ok = aug[d].size() == x.size();
        for (std::size_t i = 0; ok && i < x.size(); ++i) {
          ok = aug[d][i].first == x[i].word && aug[d][i].second == static_cast<double>(x[i].count);
        }
      }
      failures += !ok;
    }
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(checks - failures) + "/" + std::to_string(checks) + " corpus/clustering pairs conserve mass" +
             " and reproduce x at eta = 0 exactly";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient check", gradient_check},
      {"beta contract", beta_contract},
      {"Sinkhorn contract", sinkhorn_contract},
      {"KL oracle", kl_oracle},
      {"synthetic recovery", synthetic_recovery},
      {"ablation ordering", ablation_ordering},
      {"metric oracles", metric_oracles},
      {"pipeline determinism", pipeline_determinism},
      {"aggregation conservation", aggregation_conservation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.detail = std::string("threw: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
