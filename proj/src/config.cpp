#include "glocom/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "glocom/error.hpp"
#include "glocom/formats.hpp"

namespace glocom {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail(ErrorKind::Format, "config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::Format, "config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::Format, "config: '" + key + "' expects true/false, got '" + v + "'");
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += names.empty() ? name : std::string("|") + name;
  }
  fail(ErrorKind::Format, "config: '" + key + "' expects one of " + names + ", got '" + v + "'");
}

Ablation parse_ablation(const std::string& key, const std::string& v) {
  return parse_enum<Ablation>(key, v, {{"full", Ablation::Full},
                                       {"no_clustering", Ablation::NoClustering},
                                       {"no_augmentation", Ablation::NoAugmentation}});
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define GLOCOM_DOUBLE(name, member)                                                              \
  Field{name, [](TrainConfig& c, const std::string& v) { c.member = parse_double(name, v); }, \
        [](const TrainConfig& c) { return format_double(c.member); }}
#define GLOCOM_SIZE(name, member)                                                                  \
  Field{name, [](TrainConfig& c, const std::string& v) { c.member = parse_u64(name, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.member); }}

const std::vector<Field>& train_fields() {
  static const std::vector<Field> fields = {
      GLOCOM_SIZE("K", K),
      GLOCOM_SIZE("G", G),
      GLOCOM_DOUBLE("tau", tau),
      GLOCOM_DOUBLE("eta", eta),
      GLOCOM_DOUBLE("epsilon", epsilon),
      GLOCOM_DOUBLE("lambda_ecr", lambda_ecr),
      GLOCOM_SIZE("epochs", epochs),
      GLOCOM_SIZE("batch_size", batch_size),
      GLOCOM_DOUBLE("lr", lr),
      GLOCOM_SIZE("hidden_width", hidden_width),
      GLOCOM_SIZE("embed_dim", embed_dim),
      GLOCOM_SIZE("seed", seed),
      Field{"ablation", [](TrainConfig& c, const std::string& v) { c.ablation = parse_ablation("ablation", v); },
            [](const TrainConfig& c) { return to_string(c.ablation); }},
      Field{"noc_mode",
            [](TrainConfig& c, const std::string& v) {
              c.noc_mode = parse_enum<NocMode>("noc_mode", v, {{"singleton", NocMode::Singleton}, {"direct", NocMode::Direct}});
            },
            [](const TrainConfig& c) { return to_string(c.noc_mode); }},
      Field{"embedding_source",
            [](TrainConfig& c, const std::string& v) {
              c.embedding_source = parse_enum<EmbeddingSource>(
                  "embedding_source", v, {{"precomputed", EmbeddingSource::PrecomputedFile}, {"tfidf", EmbeddingSource::Tfidf}});
            },
            [](const TrainConfig& c) { return to_string(c.embedding_source); }},
      Field{"kl_attribution",
            [](TrainConfig& c, const std::string& v) {
              c.kl_attribution = parse_enum<KlAttribution>(
                  "kl_attribution", v, {{"equal_share", KlAttribution::EqualShare}, {"per_document", KlAttribution::PerDocument}});
            },
            [](const TrainConfig& c) { return to_string(c.kl_attribution); }},
      GLOCOM_SIZE("kl_warmup_epochs", kl_warmup_epochs),
      GLOCOM_SIZE("top_n", top_n),
      GLOCOM_DOUBLE("ecr.nu", ecr.nu),
      GLOCOM_SIZE("ecr.max_iters", ecr.max_iters),
      GLOCOM_DOUBLE("ecr.tol", ecr.tol),
  };
  return fields;
}

#undef GLOCOM_DOUBLE
#undef GLOCOM_SIZE

struct SpecField {
  std::string key;
  std::function<void(SyntheticSpec&, const std::string&, const std::string&)> set;
  std::function<std::string(const SyntheticSpec&)> get;
};

#define GLOCOM_SPEC_SIZE(name, member)                                                                     \
  SpecField{name, [](SyntheticSpec& s, const std::string& k, const std::string& v) { s.member = parse_u64(k, v); }, \
            [](const SyntheticSpec& s) { return std::to_string(s.member); }}
#define GLOCOM_SPEC_DOUBLE(name, member)                                                                      \
  SpecField{name, [](SyntheticSpec& s, const std::string& k, const std::string& v) { s.member = parse_double(k, v); }, \
            [](const SyntheticSpec& s) { return format_double(s.member); }}

const std::vector<SpecField>& spec_fields() {
  static const std::vector<SpecField> fields = {
      GLOCOM_SPEC_SIZE("V", V),
      GLOCOM_SPEC_SIZE("K", K),
      GLOCOM_SPEC_SIZE("G", G),
      GLOCOM_SPEC_SIZE("D", D),
      GLOCOM_SPEC_SIZE("doc_min", doc_min),
      GLOCOM_SPEC_SIZE("doc_max", doc_max),
      GLOCOM_SPEC_DOUBLE("epsilon_true", epsilon_true),
      GLOCOM_SPEC_DOUBLE("block_mass", block_mass),
      GLOCOM_SPEC_DOUBLE("cluster_affinity", cluster_affinity),
      GLOCOM_SPEC_SIZE("embedding_dim", embedding_dim),
      GLOCOM_SPEC_DOUBLE("embedding_noise", embedding_noise),
      GLOCOM_SPEC_SIZE("word_embedding_dim", word_embedding_dim),
      GLOCOM_SPEC_DOUBLE("word_embedding_noise", word_embedding_noise),
      GLOCOM_SPEC_SIZE("seed", seed),
      GLOCOM_SPEC_SIZE("max_retries", max_retries),
  };
  return fields;
}

#undef GLOCOM_SPEC_SIZE
#undef GLOCOM_SPEC_DOUBLE

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail(ErrorKind::Invalid, "cannot format number");
  return std::string(buf, ptr);
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::NoClustering: return "no_clustering";
    case Ablation::NoAugmentation: return "no_augmentation";
  }
  return "full";
}

std::string to_string(NocMode m) { return m == NocMode::Direct ? "direct" : "singleton"; }
std::string to_string(EmbeddingSource s) { return s == EmbeddingSource::Tfidf ? "tfidf" : "precomputed"; }
std::string to_string(KlAttribution k) { return k == KlAttribution::PerDocument ? "per_document" : "equal_share"; }

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Format, origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(ErrorKind::Format, origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) fail(ErrorKind::Format, origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  return parse_key_values(read_text_file(path), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void reject_unknown_keys(const KeyValues& kv, const std::vector<std::string>& known, const std::string& origin) {
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      fail(ErrorKind::Invalid, origin + ": unknown key '" + k + "'");
    }
  }
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : train_fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_train_config(TrainConfig& config, const KeyValues& kv) {
  for (const auto& f : train_fields()) {
    if (auto it = kv.find(f.key); it != kv.end()) f.set(config, it->second);
  }
}

KeyValues train_config_values(const TrainConfig& config) {
  KeyValues kv;
  for (const auto& f : train_fields()) kv[f.key] = f.get(config);
  return kv;
}

const std::vector<std::string>& synthetic_spec_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : spec_fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_synthetic_spec(SyntheticSpec& spec, const KeyValues& kv, const std::string& prefix) {
  for (const auto& f : spec_fields()) {
    if (auto it = kv.find(prefix + f.key); it != kv.end()) f.set(spec, it->first, it->second);
  }
}

KeyValues synthetic_spec_values(const SyntheticSpec& spec, const std::string& prefix) {
  KeyValues kv;
  for (const auto& f : spec_fields()) kv[prefix + f.key] = f.get(spec);
  return kv;
}

const std::vector<std::string>& pipeline_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = train_config_keys();
    for (const char* extra : {"input", "corpus", "labels", "embeddings", "reference", "word_embeddings", "min_freq",
                              "min_terms", "kmeans.normalize", "kmeans.max_iters"}) {
      k.push_back(extra);
    }
    for (const auto& s : synthetic_spec_keys()) k.push_back("synth." + s);
    return k;
  }();
  return keys;
}

PipelineConfig pipeline_config_from(const KeyValues& kv) {
  reject_unknown_keys(kv, pipeline_config_keys(), "pipeline config");
  PipelineConfig p;
  apply_train_config(p.train, kv);
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  if (auto v = get("input")) {
    if (*v == "synthetic") p.synthetic = true;
    else if (*v != "files") fail(ErrorKind::Format, "config: 'input' expects synthetic|files, got '" + *v + "'");
  }
  p.synth.seed = p.train.seed;
  p.synth.word_embedding_dim = p.train.embed_dim;
  apply_synthetic_spec(p.synth, kv, "synth.");
  if (auto v = get("corpus")) p.corpus = *v;
  if (auto v = get("labels")) p.labels = *v;
  if (auto v = get("embeddings")) p.embeddings = *v;
  if (auto v = get("reference")) p.reference = *v;
  if (auto v = get("word_embeddings")) p.word_embeddings = *v;
  if (auto v = get("min_freq")) p.min_freq = parse_u64("min_freq", *v);
  if (auto v = get("min_terms")) p.min_terms = parse_u64("min_terms", *v);
  if (auto v = get("kmeans.normalize")) p.kmeans_normalize = parse_bool("kmeans.normalize", *v);
  if (auto v = get("kmeans.max_iters")) p.kmeans_max_iters = parse_u64("kmeans.max_iters", *v);
  if (!p.synthetic) {
    require(!p.corpus.empty(), "pipeline config: 'corpus' is required unless input=synthetic");
  }
  return p;
}

KeyValues pipeline_config_values(const PipelineConfig& p) {
  KeyValues kv = train_config_values(p.train);
  kv["input"] = p.synthetic ? "synthetic" : "files";
  if (p.synthetic) {
    for (auto& [k, v] : synthetic_spec_values(p.synth, "synth.")) kv[k] = v;
  }
  if (!p.corpus.empty()) kv["corpus"] = p.corpus.string();
  if (!p.labels.empty()) kv["labels"] = p.labels.string();
  if (!p.embeddings.empty()) kv["embeddings"] = p.embeddings.string();
  if (!p.reference.empty()) kv["reference"] = p.reference.string();
  if (!p.word_embeddings.empty()) kv["word_embeddings"] = p.word_embeddings.string();
  kv["min_freq"] = std::to_string(p.min_freq);
  kv["min_terms"] = std::to_string(p.min_terms);
  kv["kmeans.normalize"] = p.kmeans_normalize ? "true" : "false";
  kv["kmeans.max_iters"] = std::to_string(p.kmeans_max_iters);
  return kv;
}

}  // namespace glocom
