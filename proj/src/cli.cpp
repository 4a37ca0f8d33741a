#include "glocom/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>

#include "glocom/aggregation.hpp"
#include "glocom/config.hpp"
#include "glocom/corpus.hpp"
#include "glocom/error.hpp"
#include "glocom/eval.hpp"
#include "glocom/formats.hpp"
#include "glocom/model.hpp"
#include "glocom/synthetic.hpp"
#include "glocom/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace glocom {

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open input for hashing: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run manifest: command line, resolved config, input digests, seed, version, timestamps.
class Manifest {
 public:
  Manifest(int argc, char** argv, std::string command) {
    j_["command"] = command;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    j_["argv"] = args;
    j_["tool_version"] = kToolVersion;
    j_["started_at"] = utc_now();
    j_["inputs"] = json::object();
    j_["config"] = json::object();
  }

  void input(const std::string& role, const fs::path& path) {
    if (path.empty()) return;
    j_["inputs"][role] = {{"path", path.string()}, {"fnv1a64", file_digest(path)}};
  }
  void config(const KeyValues& kv) {
    for (const auto& [k, v] : kv) j_["config"][k] = v;
  }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  json& extra() { return j_; }

  void write(const fs::path& file) const { write_text_file(file, j_.dump(2) + "\n"); }
  void finish(const fs::path& file) {
    j_["finished_at"] = utc_now();
    write(file);
  }

 private:
  json j_;
};

std::vector<long long> to_ids(const std::vector<std::size_t>& v) {
  return std::vector<long long>(v.begin(), v.end());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) fail(ErrorKind::Io, what + " not found: " + path.string());
}

// ---- stage implementations shared by the subcommands and the pipeline ----

struct Preprocessed {
  Vocabulary vocab;
  BowCorpus corpus;
  std::vector<std::size_t> kept;
  std::optional<Tensor2> embeddings;
};

Preprocessed preprocess_stage(const fs::path& corpus_path, const fs::path& labels_path, const fs::path& emb_path,
                              std::size_t min_freq, std::size_t min_terms, const fs::path& out) {
  require_file(corpus_path, "corpus file");
  const auto raw = read_tokenized_corpus(corpus_path);
  Preprocessed p;
  p.vocab = build_vocabulary(raw, min_freq);
  auto filtered = build_bow(raw, p.vocab, min_terms);
  p.corpus = std::move(filtered.corpus);
  p.kept = std::move(filtered.kept);
  if (!labels_path.empty()) {
    require_file(labels_path, "label file");
    const auto labels = read_labels(labels_path);
    if (labels.size() != raw.size()) {
      fail(ErrorKind::Invalid, "label file has " + std::to_string(labels.size()) + " lines, corpus has " +
                                   std::to_string(raw.size()) + " documents");
    }
    p.corpus.set_labels(select_labels(labels, p.kept));
  }
  if (!emb_path.empty()) {
    require_file(emb_path, "embedding file");
    p.embeddings = select_rows(load_embeddings(emb_path, raw.size()).rows, p.kept);
  }
  ensure_dir(out);
  write_vocabulary(out / "vocab.txt", p.vocab);
  write_bow(out / "bow.txt", p.corpus);
  write_ints(out / "kept.txt", to_ids(p.kept));
  if (p.corpus.has_labels()) write_labels(out / "labels.txt", p.corpus.labels());
  if (p.embeddings) save_embeddings(out / "embeddings.gemb", *p.embeddings);
  return p;
}

ClusterAssignment cluster_stage(const EmbeddingMatrix& emb, std::size_t groups, std::uint64_t seed, bool normalize,
                                std::size_t max_iters, const fs::path& out_file) {
  KMeansOptions opts;
  opts.groups = groups;
  opts.seed = seed;
  opts.l2_normalize = normalize;
  opts.max_iters = max_iters;
  ClusterAssignment a = kmeans(emb, opts);
  if (!out_file.parent_path().empty()) ensure_dir(out_file.parent_path());
  write_ints(out_file, to_ids(a.assignment));
  return a;
}

ClusterAssignment read_assignment(const fs::path& path, std::size_t num_docs) {
  require_file(path, "cluster file");
  ClusterAssignment a = assignment_from_ids(read_ints(path));
  if (a.assignment.size() != num_docs) {
    fail(ErrorKind::Invalid, "cluster file has " + std::to_string(a.assignment.size()) + " entries, corpus has " +
                                 std::to_string(num_docs) + " documents");
  }
  return a;
}

json report_json(const TrainReport& r, const TrainingData& data) {
  json j;
  j["epochs"] = r.trajectory.size();
  j["nu"] = r.nu;
  j["wall_seconds"] = r.wall_seconds;
  j["checkpoint"] = r.checkpoint.string();
  json traj = json::array();
  for (const auto& e : r.trajectory) {
    traj.push_back({{"total", e.total},
                    {"reconstruction", e.reconstruction},
                    {"kl_global", e.kl_global},
                    {"kl_local", e.kl_local},
                    {"ecr", e.ecr}});
  }
  j["trajectory"] = traj;
  j["warnings"] = data.warnings;
  return j;
}

struct Trained {
  TrainResult result;
  TrainingData data;
};

/// Writes checkpoint/, clusters.txt (the assignment actually trained on), config.txt and report.json.
Trained train_stage(const BowCorpus& corpus, const ClusterAssignment& assignment, const TrainConfig& config,
                    const Tensor2* word_init, const fs::path& out) {
  Trained t{TrainResult{}, prepare_training_data(corpus, assignment, config)};
  for (const auto& w : t.data.warnings) std::cerr << "warning: " << w << "\n";
  t.result = train(corpus, t.data, config, word_init);
  ensure_dir(out);
  t.result.report.checkpoint = out / "checkpoint";
  save_checkpoint(t.result.report.checkpoint, t.result.model);
  write_ints(out / "clusters.txt", to_ids(t.data.assignment.assignment));
  write_text_file(out / "config.txt", format_key_values(train_config_values(config)));
  write_text_file(out / "report.json", report_json(t.result.report, t.data).dump(2) + "\n");
  return t;
}

TopicSet topic_words(const TopicModelOutput& out, const Vocabulary& vocab) {
  TopicSet topics;
  for (const auto& ids : out.top_words) {
    std::vector<std::string> words;
    for (auto id : ids) words.push_back(vocab.word(id));
    topics.push_back(std::move(words));
  }
  return topics;
}

TopicModelOutput infer_stage(const GlocomModel& model, const BowCorpus& corpus, const ClusterAssignment& assignment,
                             const Vocabulary& vocab, std::size_t top_n, const fs::path& out) {
  if (vocab.size() != model.shape().vocab_size) {
    fail(ErrorKind::Invalid, "vocabulary has " + std::to_string(vocab.size()) + " words, checkpoint expects " +
                                 std::to_string(model.shape().vocab_size));
  }
  TopicModelOutput result = infer(model, corpus, assignment, top_n);
  ensure_dir(out);
  write_topics(out / "topics.txt", topic_words(result, vocab));
  write_csv(out / "theta_local.csv", result.theta_local);
  write_csv(out / "theta_global.csv", result.theta_global);
  write_csv(out / "beta.csv", result.beta);
  return result;
}

Metrics eval_stage(const TopicSet& topics, const Tensor2* theta, const std::vector<int>* labels,
                   const BowCorpus& reference, const Vocabulary& reference_vocab, const fs::path& out_file) {
  Metrics m;
  m.td = topic_diversity(topics);
  if (theta && labels) {
    if (theta->rows() != labels->size()) {
      fail(ErrorKind::Invalid, "theta has " + std::to_string(theta->rows()) + " rows, labels have " +
                                   std::to_string(labels->size()) + " entries");
    }
    const auto pred = argmax_rows(*theta);
    m.purity = purity(pred, *labels);
    m.nmi = nmi(pred, *labels);
  }
  const NpmiResult np = npmi_coherence(topics, reference, reference_vocab);
  m.npmi = np.mean;
  m.npmi_per_topic = np.per_topic;
  if (!out_file.parent_path().empty()) ensure_dir(out_file.parent_path());
  write_text_file(out_file, metrics_json(m));
  return m;
}

/// Reference corpus for NPMI: a BoW file when a vocabulary is given, else tokenized text.
std::pair<BowCorpus, Vocabulary> load_reference(const fs::path& path, const fs::path& vocab_path) {
  require_file(path, "reference corpus");
  if (!vocab_path.empty()) {
    require_file(vocab_path, "reference vocabulary");
    Vocabulary vocab = read_vocabulary(vocab_path);
    BowCorpus bow = read_bow(path);
    require(bow.vocab_size() == vocab.size(), "reference BoW and vocabulary sizes differ");
    return {std::move(bow), std::move(vocab)};
  }
  const auto raw = read_tokenized_corpus(path);
  Vocabulary vocab = build_vocabulary(raw, 1);
  BowCorpus bow = build_bow(raw, vocab, 1).corpus;
  return {std::move(bow), std::move(vocab)};
}

void write_corpus_text(const fs::path& path, const BowCorpus& corpus, const Vocabulary& vocab) {
  std::string text;
  for (const auto& doc : corpus.docs()) {
    bool first = true;
    for (const auto& e : doc) {
      for (std::uint32_t c = 0; c < e.count; ++c) {
        if (!first) text += ' ';
        text += vocab.word(e.word);
        first = false;
      }
    }
    text += '\n';
  }
  write_text_file(path, text);
}

/// GloVe-style text: "word v1 v2 ..." per line.
void write_word_vectors(const fs::path& path, const Vocabulary& vocab, const Tensor2& vectors) {
  std::string text;
  for (std::size_t v = 0; v < vectors.rows(); ++v) {
    text += vocab.word(v);
    for (double x : vectors.row(v)) {
      text += ' ';
      text += format_double(x);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

SyntheticData synth_stage(const SyntheticSpec& spec, const fs::path& out) {
  SyntheticData data = generate(spec);
  ensure_dir(out);
  write_corpus_text(out / "corpus.txt", data.corpus, data.vocab);
  write_bow(out / "bow.txt", data.corpus);
  write_vocabulary(out / "vocab.txt", data.vocab);
  write_labels(out / "labels.txt", data.corpus.labels());
  save_embeddings(out / "embeddings.gemb", data.doc_embeddings);
  write_csv(out / "truth_beta.csv", data.truth.beta);
  write_csv(out / "truth_theta_global.csv", data.truth.theta_g);
  write_csv(out / "truth_theta_local.csv", data.truth.theta_gd);
  if (data.word_embeddings.rows() > 0) write_word_vectors(out / "word_vectors.txt", data.vocab, data.word_embeddings);
  return data;
}

// ---- subcommand wiring ----

/// Adds --<key> for every TrainConfig key; parsed values override the config file.
void add_config_overrides(CLI::App* sub, KeyValues& overrides) {
  for (const auto& key : train_config_keys()) {
    sub->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "override config key " + key);
  }
}

TrainConfig resolve_train_config(const fs::path& config_path, const KeyValues& overrides) {
  KeyValues kv;
  if (!config_path.empty()) {
    require_file(config_path, "config file");
    kv = read_config_file(config_path);
    reject_unknown_keys(kv, train_config_keys(), config_path.string());
  }
  for (const auto& [k, v] : overrides) kv[k] = v;
  TrainConfig c;
  apply_train_config(c, kv);
  validate(c);
  return c;
}

struct Context {
  int argc;
  char** argv;
};

int cmd_preprocess(const Context& ctx, const fs::path& corpus, const fs::path& out, std::size_t min_freq,
                   std::size_t min_terms, const fs::path& labels, const fs::path& emb) {
  Manifest man(ctx.argc, ctx.argv, "preprocess");
  require_file(corpus, "corpus file");
  man.input("corpus", corpus);
  man.input("labels", labels);
  man.input("embeddings", emb);
  man.config({{"min_freq", std::to_string(min_freq)}, {"min_terms", std::to_string(min_terms)}});
  ensure_dir(out);
  man.write(out / "manifest.json");
  const auto p = preprocess_stage(corpus, labels, emb, min_freq, min_terms, out);
  std::cout << "kept " << p.corpus.num_docs() << " documents, vocabulary " << p.vocab.size() << "\n";
  man.finish(out / "manifest.json");
  return 0;
}

int cmd_cluster(const Context& ctx, const fs::path& emb_path, const fs::path& bow_path, std::size_t groups,
                std::uint64_t seed, const fs::path& out, bool normalize, std::size_t max_iters) {
  Manifest man(ctx.argc, ctx.argv, "cluster");
  EmbeddingMatrix emb;
  if (!emb_path.empty()) {
    require_file(emb_path, "embedding file");
    man.input("embeddings", emb_path);
    emb = load_embeddings(emb_path, std::nullopt);
  } else {
    require(!bow_path.empty(), "cluster: give --embeddings or --bow (TF-IDF representation)");
    require_file(bow_path, "BoW file");
    man.input("bow", bow_path);
    emb = tfidf(read_bow(bow_path));
  }
  man.seed(seed);
  man.config({{"groups", std::to_string(groups)},
              {"normalize", normalize ? "true" : "false"},
              {"max_iters", std::to_string(max_iters)},
              {"source", to_string(emb.source)}});
  const fs::path man_file = fs::path(out.string() + ".manifest.json");
  if (!out.parent_path().empty()) ensure_dir(out.parent_path());
  man.write(man_file);
  const auto a = cluster_stage(emb, groups, seed, normalize, max_iters, out);
  std::cout << "inertia " << a.inertia << " after " << a.iterations << " iterations\n";
  man.finish(man_file);
  return 0;
}

int cmd_train(const Context& ctx, const fs::path& bow, const fs::path& clusters, const fs::path& config_path,
              const KeyValues& overrides, const fs::path& out, const fs::path& vocab_path, const fs::path& word_emb) {
  const TrainConfig config = resolve_train_config(config_path, overrides);
  Manifest man(ctx.argc, ctx.argv, "train");
  require_file(bow, "BoW file");
  man.input("corpus", bow);
  man.input("clusters", clusters);
  man.input("config", config_path);
  man.input("vocab", vocab_path);
  man.input("word_embeddings", word_emb);
  man.config(train_config_values(config));
  man.seed(config.seed);
  ensure_dir(out);
  man.write(out / "manifest.json");

  const BowCorpus corpus = read_bow(bow);
  const ClusterAssignment assignment = read_assignment(clusters, corpus.num_docs());
  std::optional<Tensor2> init;
  if (!word_emb.empty()) {
    require(!vocab_path.empty(), "train: --word-embeddings needs --vocab");
    const Vocabulary vocab = read_vocabulary(vocab_path);
    Rng rng = make_stream(config.seed, "init");
    auto w = load_word_embeddings(word_emb, vocab, rng, config.embed_dim);
    require(w.vectors.cols() == config.embed_dim,
            "word embeddings have dimension " + std::to_string(w.vectors.cols()) + ", config embed_dim is " +
                std::to_string(config.embed_dim));
    std::cout << "word-embedding coverage " << w.coverage << "\n";
    init = std::move(w.vectors);
  }
  const auto t = train_stage(corpus, assignment, config, init ? &*init : nullptr, out);
  const auto& traj = t.result.report.trajectory;
  if (!traj.empty()) std::cout << "final loss " << traj.back().total << "\n";
  man.finish(out / "manifest.json");
  return 0;
}

int cmd_infer(const Context& ctx, const fs::path& checkpoint, const fs::path& bow, const fs::path& clusters,
              const fs::path& vocab_path, std::size_t top_n, const fs::path& out) {
  Manifest man(ctx.argc, ctx.argv, "infer");
  require_file(checkpoint / "manifest.txt", "checkpoint manifest");
  require_file(bow, "BoW file");
  require_file(vocab_path, "vocabulary file");
  man.input("checkpoint", checkpoint / "manifest.txt");
  man.input("corpus", bow);
  man.input("clusters", clusters);
  man.input("vocab", vocab_path);
  man.config({{"top_n", std::to_string(top_n)}});
  ensure_dir(out);
  man.write(out / "manifest.json");
  const GlocomModel model = load_checkpoint(checkpoint);
  const BowCorpus corpus = read_bow(bow);
  const ClusterAssignment a = read_assignment(clusters, corpus.num_docs());
  infer_stage(model, corpus, a, read_vocabulary(vocab_path), top_n, out);
  man.finish(out / "manifest.json");
  return 0;
}

int cmd_eval(const Context& ctx, const fs::path& topics_path, const fs::path& theta_path, const fs::path& labels_path,
             const fs::path& reference, const fs::path& reference_vocab, const fs::path& out) {
  Manifest man(ctx.argc, ctx.argv, "eval");
  require_file(topics_path, "topics file");
  man.input("topics", topics_path);
  man.input("theta", theta_path);
  man.input("labels", labels_path);
  man.input("reference", reference);
  man.input("reference_vocab", reference_vocab);
  const TopicSet topics = read_topics(topics_path);
  std::optional<Tensor2> theta;
  std::optional<std::vector<int>> labels;
  if (!theta_path.empty()) {
    require_file(theta_path, "theta file");
    theta = read_csv(theta_path);
  }
  if (!labels_path.empty()) {
    require_file(labels_path, "label file");
    labels = read_labels(labels_path);
  }
  const auto [ref, ref_vocab] = load_reference(reference, reference_vocab);
  const Metrics m = eval_stage(topics, theta ? &*theta : nullptr, labels ? &*labels : nullptr, ref, ref_vocab, out);
  std::cout << metrics_json(m);
  man.finish(fs::path(out.string() + ".manifest.json"));
  return 0;
}

int cmd_synth(const Context& ctx, const fs::path& spec_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  Manifest man(ctx.argc, ctx.argv, "synth");
  SyntheticSpec spec;
  if (!spec_path.empty()) {
    require_file(spec_path, "spec file");
    man.input("spec", spec_path);
    const KeyValues kv = read_config_file(spec_path);
    reject_unknown_keys(kv, synthetic_spec_keys(), spec_path.string());
    apply_synthetic_spec(spec, kv);
  }
  if (seed) spec.seed = *seed;
  man.config(synthetic_spec_values(spec));
  man.seed(spec.seed);
  ensure_dir(out);
  man.write(out / "manifest.json");
  const auto data = synth_stage(spec, out);
  std::cout << "generated " << data.corpus.num_docs() << " documents over " << data.vocab.size() << " words\n";
  man.finish(out / "manifest.json");
  return 0;
}

int cmd_grid(const Context& ctx, const fs::path& bow, const fs::path& clusters, const fs::path& labels_path,
             const fs::path& config_path, const KeyValues& overrides, const std::vector<std::string>& grid_args,
             const fs::path& out) {
  const TrainConfig base = resolve_train_config(config_path, overrides);
  Manifest man(ctx.argc, ctx.argv, "grid");
  require_file(bow, "BoW file");
  man.input("corpus", bow);
  man.input("clusters", clusters);
  man.input("labels", labels_path);
  man.input("config", config_path);
  man.config(train_config_values(base));
  man.seed(base.seed);
  ensure_dir(out);
  man.write(out / "manifest.json");

  std::map<std::string, std::vector<double>> grids;
  for (const auto& g : grid_args) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Format, "grid: expected key=v1,v2,... got '" + g + "'");
    const std::string key = g.substr(0, eq);
    std::vector<double> values;
    std::stringstream ss(g.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        fail(ErrorKind::Format, "grid: bad value '" + item + "' for " + key);
      }
    }
    grids[key] = values;
  }
  if (grids.empty()) grids = default_grids();

  BowCorpus corpus = read_bow(bow);
  if (!labels_path.empty()) {
    require_file(labels_path, "label file");
    corpus.set_labels(read_labels(labels_path));
  }
  const ClusterAssignment a = read_assignment(clusters, corpus.num_docs());
  const GridReport report = grid_search(corpus, a, base, grids);
  json j;
  j["objective"] = report.by_nmi ? "nmi" : "final_loss";
  json ranked = json::array();
  for (const auto& e : report.ranked) {
    json row;
    for (const auto& [k, v] : e.point) row["point"][k] = v;
    row["objective"] = e.objective;
    row["nmi"] = e.nmi ? json(*e.nmi) : json(nullptr);
    row["final_loss"] = e.final_loss;
    ranked.push_back(row);
  }
  j["ranked"] = ranked;
  write_text_file(out / "grid_report.json", j.dump(2) + "\n");
  if (!report.ranked.empty()) {
    write_text_file(out / "best_config.txt", format_key_values(train_config_values(report.ranked.front().config)));
  }
  man.finish(out / "manifest.json");
  return 0;
}

class StageFailure : public std::runtime_error {
 public:
  StageFailure(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

const char* const kStages[] = {"", "preprocess", "cluster", "train", "infer", "eval", "synth"};

template <typename F>
auto run_stage(int index, json& status, F&& fn) {
  try {
    auto result = fn();
    status[kStages[index]] = "ok";
    return result;
  } catch (const Error& e) {
    status[kStages[index]] = "failed";
    throw StageFailure(kPipelineStageBase + index,
                       std::string("pipeline: stage '") + kStages[index] + "' failed: " + e.what());
  }
}

int cmd_pipeline(const Context& ctx, const fs::path& config_path, const KeyValues& overrides, const fs::path& out) {
  require_file(config_path, "config file");
  KeyValues kv = read_config_file(config_path);
  for (const auto& [k, v] : overrides) kv[k] = v;
  const PipelineConfig pc = pipeline_config_from(kv);
  validate(pc.train);

  Manifest man(ctx.argc, ctx.argv, "pipeline");
  man.input("config", config_path);
  if (!pc.synthetic) {
    require_file(pc.corpus, "corpus file");
    man.input("corpus", pc.corpus);
    man.input("labels", pc.labels);
    man.input("embeddings", pc.embeddings);
    man.input("reference", pc.reference);
    man.input("word_embeddings", pc.word_embeddings);
  }
  man.config(pipeline_config_values(pc));
  man.seed(pc.train.seed);
  ensure_dir(out);
  const fs::path man_file = out / "manifest.json";
  json& status = man.extra()["stages"];
  status = json::object();
  man.write(man_file);

  try {
    fs::path corpus_path = pc.corpus, labels_path = pc.labels, emb_path = pc.embeddings;
    fs::path word_path = pc.word_embeddings;
    if (pc.synthetic) {
      run_stage(6, status, [&] { return synth_stage(pc.synth, out / "synth"); });
      corpus_path = out / "synth" / "corpus.txt";
      labels_path = out / "synth" / "labels.txt";
      if (pc.train.embedding_source == EmbeddingSource::PrecomputedFile) emb_path = out / "synth" / "embeddings.gemb";
      if (word_path.empty() && pc.synth.word_embedding_dim > 0) word_path = out / "synth" / "word_vectors.txt";
    }
    const fs::path data_dir = out / "data";
    const Preprocessed pre = run_stage(1, status, [&] {
      const fs::path emb = pc.train.embedding_source == EmbeddingSource::PrecomputedFile ? emb_path : fs::path();
      if (pc.train.embedding_source == EmbeddingSource::PrecomputedFile) {
        require(!emb.empty(), "embedding_source=precomputed needs an 'embeddings' file");
      }
      return preprocess_stage(corpus_path, labels_path, emb, pc.min_freq, pc.min_terms, data_dir);
    });
    const ClusterAssignment assignment = run_stage(2, status, [&] {
      EmbeddingMatrix emb = pre.embeddings ? EmbeddingMatrix{*pre.embeddings, EmbeddingSource::PrecomputedFile}
                                           : tfidf(pre.corpus);
      return cluster_stage(emb, pc.train.G, pc.train.seed, pc.kmeans_normalize, pc.kmeans_max_iters,
                           data_dir / "clusters.txt");
    });
    const Trained trained = run_stage(3, status, [&] {
      std::optional<Tensor2> init;
      if (!word_path.empty()) {
        Rng rng = make_stream(pc.train.seed, "init");
        init = load_word_embeddings(word_path, pre.vocab, rng, pc.train.embed_dim).vectors;
        require(init->cols() == pc.train.embed_dim, "word embedding dimension differs from embed_dim");
      }
      return train_stage(pre.corpus, assignment, pc.train, init ? &*init : nullptr, out / "train");
    });
    const TopicModelOutput output = run_stage(4, status, [&] {
      return infer_stage(trained.result.model, pre.corpus, trained.data.assignment, pre.vocab, pc.train.top_n, out);
    });
    run_stage(5, status, [&] {
      std::pair<BowCorpus, Vocabulary> ref;
      if (pc.reference.empty()) {
        ref = {pre.corpus, pre.vocab};
      } else {
        ref = load_reference(pc.reference, {});
      }
      const auto* labels = pre.corpus.has_labels() ? &pre.corpus.labels() : nullptr;
      return eval_stage(topic_words(output, pre.vocab), &output.theta_local, labels, ref.first, ref.second,
                        out / "metrics.json");
    });
  } catch (const StageFailure& f) {
    man.finish(man_file);
    std::cerr << f.what() << "\n";
    return f.code();
  }
  man.finish(man_file);
  std::cout << read_text_file(out / "metrics.json");
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Short-text topic modeling with clustering-based global context"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  const Context ctx{argc, argv};
  std::function<int()> action;

  // preprocess
  fs::path pp_corpus, pp_out, pp_labels, pp_emb;
  std::size_t pp_min_freq = 3, pp_min_terms = 2;
  auto* pp = app.add_subcommand("preprocess", "Build vocabulary and BoW from a tokenized corpus");
  pp->add_option("--corpus", pp_corpus, "Tokenized corpus, one document per line")->required();
  pp->add_option("--out", pp_out, "Output directory")->required();
  pp->add_option("--min-freq", pp_min_freq, "Minimum corpus frequency of a word")->capture_default_str();
  pp->add_option("--min-terms", pp_min_terms, "Minimum distinct terms per document")->capture_default_str();
  pp->add_option("--labels", pp_labels, "Labels aligned to the raw corpus");
  pp->add_option("--embeddings", pp_emb, "Document embeddings aligned to the raw corpus");
  pp->callback([&] { action = [&] { return cmd_preprocess(ctx, pp_corpus, pp_out, pp_min_freq, pp_min_terms, pp_labels, pp_emb); }; });

  // cluster
  fs::path cl_emb, cl_bow, cl_out;
  std::size_t cl_groups = 0, cl_iters = 100;
  std::uint64_t cl_seed = 0;
  bool cl_norm = false;
  auto* cl = app.add_subcommand("cluster", "K-means over document embeddings");
  auto* cl_emb_opt = cl->add_option("--embeddings", cl_emb, "Document embeddings (GEMB or CSV)");
  cl->add_option("--bow", cl_bow, "Cluster TF-IDF rows of this BoW file instead")->excludes(cl_emb_opt);
  cl->add_option("--groups", cl_groups, "Number of clusters G")->required();
  cl->add_option("--seed", cl_seed, "Run seed")->capture_default_str();
  cl->add_option("--out", cl_out, "Cluster assignment file")->required();
  cl->add_option("--max-iters", cl_iters, "Lloyd iteration cap")->capture_default_str();
  cl->add_flag("--normalize", cl_norm, "L2-normalize rows first");
  cl->callback([&] { action = [&] { return cmd_cluster(ctx, cl_emb, cl_bow, cl_groups, cl_seed, cl_out, cl_norm, cl_iters); }; });

  // train
  fs::path tr_bow, tr_clusters, tr_config, tr_out, tr_vocab, tr_wemb;
  KeyValues tr_over;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--corpus", tr_bow, "BoW file")->required();
  tr->add_option("--clusters", tr_clusters, "Cluster assignment file")->required();
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--vocab", tr_vocab, "Vocabulary (needed with --word-embeddings)");
  tr->add_option("--word-embeddings", tr_wemb, "GloVe-style word vectors");
  add_config_overrides(tr, tr_over);
  tr->callback([&] { action = [&] { return cmd_train(ctx, tr_bow, tr_clusters, tr_config, tr_over, tr_out, tr_vocab, tr_wemb); }; });

  // infer
  fs::path in_ckpt, in_bow, in_clusters, in_vocab, in_out;
  std::size_t in_top = 15;
  auto* in = app.add_subcommand("infer", "Topic and document-topic outputs from a checkpoint");
  in->add_option("--checkpoint", in_ckpt, "Checkpoint directory")->required();
  in->add_option("--corpus", in_bow, "BoW file")->required();
  in->add_option("--clusters", in_clusters, "Cluster assignment the model was trained on")->required();
  in->add_option("--vocab", in_vocab, "Vocabulary file")->required();
  in->add_option("--top-n", in_top, "Words per topic")->capture_default_str();
  in->add_option("--out", in_out, "Output directory")->required();
  in->callback([&] { action = [&] { return cmd_infer(ctx, in_ckpt, in_bow, in_clusters, in_vocab, in_top, in_out); }; });

  // eval
  fs::path ev_topics, ev_theta, ev_labels, ev_ref, ev_ref_vocab, ev_out;
  auto* ev = app.add_subcommand("eval", "TD, purity, NMI and NPMI");
  ev->add_option("--topics", ev_topics, "topics.txt")->required();
  ev->add_option("--theta", ev_theta, "theta_local.csv");
  ev->add_option("--labels", ev_labels, "Gold labels");
  ev->add_option("--reference", ev_ref, "Reference corpus (tokenized text, or BoW with --reference-vocab)")->required();
  ev->add_option("--reference-vocab", ev_ref_vocab, "Vocabulary of a BoW reference");
  ev->add_option("--out", ev_out, "metrics.json path")->required();
  ev->callback([&] { action = [&] { return cmd_eval(ctx, ev_topics, ev_theta, ev_labels, ev_ref, ev_ref_vocab, ev_out); }; });

  // synth
  fs::path sy_spec, sy_out;
  std::optional<std::uint64_t> sy_seed;
  auto* sy = app.add_subcommand("synth", "Sample a corpus with planted topics and clusters");
  sy->add_option("--spec", sy_spec, "key=value spec file");
  sy->add_option("--out", sy_out, "Output directory")->required();
  sy->add_option("--seed", sy_seed, "Overrides the spec seed");
  sy->callback([&] { action = [&] { return cmd_synth(ctx, sy_spec, sy_out, sy_seed); }; });

  // pipeline
  fs::path pl_config, pl_out;
  KeyValues pl_over;
  auto* pl = app.add_subcommand("pipeline", "Run every stage from one config");
  pl->add_option("--config", pl_config, "key=value config file")->required();
  pl->add_option("--out", pl_out, "Output directory")->required();
  add_config_overrides(pl, pl_over);
  pl->callback([&] { action = [&] { return cmd_pipeline(ctx, pl_config, pl_over, pl_out); }; });

  // grid
  fs::path gr_bow, gr_clusters, gr_labels, gr_config, gr_out;
  KeyValues gr_over;
  std::vector<std::string> gr_grids;
  auto* gr = app.add_subcommand("grid", "Grid search over hyperparameters");
  gr->add_option("--corpus", gr_bow, "BoW file")->required();
  gr->add_option("--clusters", gr_clusters, "Cluster assignment file")->required();
  gr->add_option("--labels", gr_labels, "Gold labels; ranks by NMI when given");
  gr->add_option("--config", gr_config, "Base config file");
  gr->add_option("--grid", gr_grids, "key=v1,v2,... (repeatable); defaults to the eta/epsilon/lambda_ecr grid");
  gr->add_option("--out", gr_out, "Output directory")->required();
  add_config_overrides(gr, gr_over);
  gr->callback([&] { action = [&] { return cmd_grid(ctx, gr_bow, gr_clusters, gr_labels, gr_config, gr_over, gr_grids, gr_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace glocom
