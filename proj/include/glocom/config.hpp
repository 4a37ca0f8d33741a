#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glocom/synthetic.hpp"
#include "glocom/trainer.hpp"

namespace glocom {

// Flat "key=value" configuration. Blank lines and lines starting with '#'
// are ignored; nested fields use dotted keys such as ecr.nu.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "config");
KeyValues read_config_file(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

/// Throws naming the first key not listed in `known`.
void reject_unknown_keys(const KeyValues& kv, const std::vector<std::string>& known, const std::string& origin);

const std::vector<std::string>& train_config_keys();
/// Sets every TrainConfig field present in `kv`; other keys are ignored.
void apply_train_config(TrainConfig& config, const KeyValues& kv);
KeyValues train_config_values(const TrainConfig& config);

const std::vector<std::string>& synthetic_spec_keys();
/// Reads keys `prefix + name` for each SyntheticSpec field.
void apply_synthetic_spec(SyntheticSpec& spec, const KeyValues& kv, const std::string& prefix = "");
KeyValues synthetic_spec_values(const SyntheticSpec& spec, const std::string& prefix = "");

struct PipelineConfig {
  TrainConfig train;
  bool synthetic = false;            // input=synthetic
  SyntheticSpec synth;               // synth.* keys; synth.seed defaults to seed
  std::filesystem::path corpus;      // tokenized text, one document per line
  std::filesystem::path labels;      // optional
  std::filesystem::path embeddings;  // required unless embedding_source=tfidf
  std::filesystem::path reference;   // NPMI reference corpus; defaults to the training corpus
  std::filesystem::path word_embeddings;
  std::size_t min_freq = 3;
  std::size_t min_terms = 2;
  bool kmeans_normalize = false;
  std::size_t kmeans_max_iters = 100;
};

const std::vector<std::string>& pipeline_config_keys();
PipelineConfig pipeline_config_from(const KeyValues& kv);
KeyValues pipeline_config_values(const PipelineConfig& config);

std::string to_string(Ablation a);
std::string to_string(NocMode m);
std::string to_string(EmbeddingSource s);
std::string to_string(KlAttribution k);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace glocom
