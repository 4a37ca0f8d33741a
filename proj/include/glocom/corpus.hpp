#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "glocom/numerics.hpp"
#include "glocom/rng.hpp"

namespace glocom {

using TokenizedDoc = std::vector<std::string>;

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws if a token repeats or is empty.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<std::size_t> find(const std::string& token) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SparseEntry {
  std::uint32_t word;
  std::uint32_t count;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Entries sorted by word id, counts strictly positive.
using SparseDoc = std::vector<SparseEntry>;

class BowCorpus {
 public:
  BowCorpus() = default;
  /// Validates word ids against `vocab_size` and sorts/merges entries per doc.
  BowCorpus(std::size_t vocab_size, std::vector<SparseDoc> docs,
            std::optional<std::vector<int>> labels = std::nullopt);

  std::size_t num_docs() const { return docs_.size(); }
  std::size_t vocab_size() const { return vocab_size_; }
  const SparseDoc& doc(std::size_t d) const { return docs_.at(d); }
  const std::vector<SparseDoc>& docs() const { return docs_; }
  std::uint64_t doc_length(std::size_t d) const { return doc_lengths_.at(d); }
  const std::vector<std::uint64_t>& doc_lengths() const { return doc_lengths_; }
  std::size_t nnz() const;

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;
  void set_labels(std::vector<int> labels);

  /// Corpus-wide count of each word.
  std::vector<std::uint64_t> column_sums() const;
  /// Dense copy of one document.
  std::vector<double> dense_row(std::size_t d) const;

 private:
  std::size_t vocab_size_ = 0;
  std::vector<SparseDoc> docs_;
  std::vector<std::uint64_t> doc_lengths_;
  std::optional<std::vector<int>> labels_;
};

struct FilteredCorpus {
  BowCorpus corpus;
  /// kept[i] = index of the i-th kept document in the raw input.
  std::vector<std::size_t> kept;
};

enum class EmbeddingSource { PrecomputedFile, Tfidf };

struct EmbeddingMatrix {
  Tensor2 rows;
  EmbeddingSource source = EmbeddingSource::PrecomputedFile;
};

struct WordEmbeddingInit {
  Tensor2 vectors;  // V × L
  double coverage = 0.0;
};

/// Reads one document per line, whitespace tokens.
std::vector<TokenizedDoc> read_tokenized_corpus(const std::filesystem::path& path);

/// Tokens with corpus frequency ≥ min_freq, in first-occurrence order.
Vocabulary build_vocabulary(const std::vector<TokenizedDoc>& raw_docs, std::size_t min_freq);

/// Drops out-of-vocabulary tokens and then documents with fewer than
/// `min_terms` distinct terms (empty documents are always dropped).
FilteredCorpus build_bow(const std::vector<TokenizedDoc>& raw_docs, const Vocabulary& vocab,
                         std::size_t min_terms);

/// count·log(D/df), L2-normalized per row.
EmbeddingMatrix tfidf(const BowCorpus& corpus);

/// Keeps rows listed in `kept`, in that order.
Tensor2 select_rows(const Tensor2& m, const std::vector<std::size_t>& kept);
std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& kept);

// Binary embedding files: "GEMB", u64 rows, u64 cols, rows·cols f32, all little-endian.
void save_embeddings(const std::filesystem::path& path, const Tensor2& m);
/// Binary or CSV (detected from the magic bytes). `expected_rows` of nullopt skips the row check.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows);
void save_embeddings_csv(const std::filesystem::path& path, const Tensor2& m);

/// GloVe-style text. Words missing from the file get U[−0.05, 0.05] coordinates
/// drawn from `rng`; `fallback_dim` is used when the file covers no word.
WordEmbeddingInit load_word_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                       Rng& rng, std::size_t fallback_dim);
WordEmbeddingInit random_word_embeddings(std::size_t vocab_size, std::size_t dim, Rng& rng);

}  // namespace glocom
