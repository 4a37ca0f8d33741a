#include "glocom/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "glocom/error.hpp"

namespace glocom {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    require(!words_[i].empty(), "Vocabulary: empty token at index " + std::to_string(i));
    const bool inserted = index_.emplace(words_[i], i).second;
    require(inserted, "Vocabulary: duplicate token '" + words_[i] + "'");
  }
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

BowCorpus::BowCorpus(std::size_t vocab_size, std::vector<SparseDoc> docs,
                     std::optional<std::vector<int>> labels)
    : vocab_size_(vocab_size), docs_(std::move(docs)) {
  doc_lengths_.reserve(docs_.size());
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    auto& doc = docs_[d];
    std::sort(doc.begin(), doc.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.word < b.word; });
    SparseDoc merged;
    merged.reserve(doc.size());
    std::uint64_t total = 0;
    for (const auto& e : doc) {
      if (e.word >= vocab_size_) {
        std::ostringstream os;
        os << "BowCorpus: document " << d << " references word " << e.word
           << " outside vocabulary of size " << vocab_size_;
        fail(ErrorKind::Format, os.str());
      }
      if (e.count == 0) continue;
      if (!merged.empty() && merged.back().word == e.word) {
        merged.back().count += e.count;
      } else {
        merged.push_back(e);
      }
      total += e.count;
    }
    doc = std::move(merged);
    doc_lengths_.push_back(total);
  }
  if (labels) set_labels(std::move(*labels));
}

std::size_t BowCorpus::nnz() const {
  std::size_t n = 0;
  for (const auto& d : docs_) n += d.size();
  return n;
}

const std::vector<int>& BowCorpus::labels() const {
  require(labels_.has_value(), "BowCorpus: corpus carries no labels");
  return *labels_;
}

void BowCorpus::set_labels(std::vector<int> labels) {
  if (labels.size() != docs_.size()) {
    std::ostringstream os;
    os << "BowCorpus: " << labels.size() << " labels for " << docs_.size() << " documents";
    fail(ErrorKind::Invalid, os.str());
  }
  labels_ = std::move(labels);
}

std::vector<std::uint64_t> BowCorpus::column_sums() const {
  std::vector<std::uint64_t> sums(vocab_size_, 0);
  for (const auto& doc : docs_) {
    for (const auto& e : doc) sums[e.word] += e.count;
  }
  return sums;
}

std::vector<double> BowCorpus::dense_row(std::size_t d) const {
  std::vector<double> row(vocab_size_, 0.0);
  for (const auto& e : doc(d)) row[e.word] = e.count;
  return row;
}

std::vector<TokenizedDoc> read_tokenized_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open corpus file: " + path.string());
  std::vector<TokenizedDoc> docs;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    docs.emplace_back(std::istream_iterator<std::string>(ls), std::istream_iterator<std::string>());
  }
  return docs;
}

Vocabulary build_vocabulary(const std::vector<TokenizedDoc>& raw_docs, std::size_t min_freq) {
  require(min_freq >= 1, "build_vocabulary: min_freq must be at least 1");
  require(!raw_docs.empty(), "build_vocabulary: no documents");
  std::unordered_map<std::string, std::size_t> freq;
  std::vector<std::string> order;
  for (const auto& doc : raw_docs) {
    for (const auto& tok : doc) {
      auto [it, inserted] = freq.emplace(tok, 0);
      if (inserted) order.push_back(tok);
      ++it->second;
    }
  }
  std::vector<std::string> kept;
  for (auto& tok : order) {
    if (freq[tok] >= min_freq) kept.push_back(std::move(tok));
  }
  if (kept.empty()) {
    fail(ErrorKind::Invalid, "build_vocabulary: no token reaches min_freq=" + std::to_string(min_freq));
  }
  return Vocabulary(std::move(kept));
}

FilteredCorpus build_bow(const std::vector<TokenizedDoc>& raw_docs, const Vocabulary& vocab,
                         std::size_t min_terms) {
  require(min_terms >= 1, "build_bow: min_terms must be at least 1");
  std::vector<SparseDoc> docs;
  std::vector<std::size_t> kept;
  std::unordered_map<std::uint32_t, std::uint32_t> counts;
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    counts.clear();
    for (const auto& tok : raw_docs[d]) {
      if (auto id = vocab.find(tok)) ++counts[static_cast<std::uint32_t>(*id)];
    }
    if (counts.empty() || counts.size() < min_terms) continue;
    SparseDoc doc;
    doc.reserve(counts.size());
    for (const auto& [w, c] : counts) doc.push_back({w, c});
    docs.push_back(std::move(doc));
    kept.push_back(d);
  }
  if (docs.empty()) {
    fail(ErrorKind::Invalid, "build_bow: every document was dropped (min_terms=" +
                                 std::to_string(min_terms) + ")");
  }
  return {BowCorpus(vocab.size(), std::move(docs)), std::move(kept)};
}

EmbeddingMatrix tfidf(const BowCorpus& corpus) {
  require(corpus.num_docs() > 0, "tfidf: empty corpus");
  const std::size_t n_docs = corpus.num_docs();
  std::vector<std::size_t> df(corpus.vocab_size(), 0);
  for (const auto& doc : corpus.docs()) {
    for (const auto& e : doc) ++df[e.word];
  }
  Tensor2 out(n_docs, corpus.vocab_size());
  for (std::size_t d = 0; d < n_docs; ++d) {
    auto row = out.row(d);
    double norm2 = 0.0;
    for (const auto& e : corpus.doc(d)) {
      const double w = e.count * std::log(static_cast<double>(n_docs) / static_cast<double>(df[e.word]));
      row[e.word] = w;
      norm2 += w * w;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (const auto& e : corpus.doc(d)) row[e.word] *= inv;
    }
  }
  return {std::move(out), EmbeddingSource::Tfidf};
}

Tensor2 select_rows(const Tensor2& m, const std::vector<std::size_t>& kept) {
  Tensor2 out(kept.size(), m.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    require(kept[i] < m.rows(), "select_rows: kept index out of range");
    std::copy_n(m.row(kept[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& kept) {
  std::vector<int> out;
  out.reserve(kept.size());
  for (auto k : kept) {
    require(k < labels.size(), "select_labels: label file shorter than raw corpus");
    out.push_back(labels[k]);
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'G', 'E', 'M', 'B'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) fail(ErrorKind::Format, "embedding file: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void check_rows(std::size_t rows, std::optional<std::size_t> expected, const std::filesystem::path& path) {
  if (expected && rows != *expected) {
    std::ostringstream os;
    os << "embedding file " << path.string() << " has " << rows << " rows, expected " << *expected;
    fail(ErrorKind::Format, os.str());
  }
}

EmbeddingMatrix load_binary(std::istream& in, const std::filesystem::path& path,
                            std::optional<std::size_t> expected_rows) {
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (cols == 0 || rows == 0) fail(ErrorKind::Format, "embedding file: zero-sized matrix in " + path.string());
  check_rows(rows, expected_rows, path);
  std::vector<double> data(rows * cols);
  std::vector<unsigned char> buf(4 * cols);
  for (std::uint64_t r = 0; r < rows; ++r) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      fail(ErrorKind::Format, "embedding file: truncated payload in " + path.string());
    }
    for (std::uint64_t c = 0; c < cols; ++c) {
      const unsigned char* p = buf.data() + 4 * c;
      const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) {
        std::ostringstream os;
        os << "embedding file " << path.string() << ": non-finite value at row " << r << ", col " << c;
        fail(ErrorKind::Format, os.str());
      }
      data[r * cols + c] = f;
    }
  }
  return {Tensor2(rows, cols, std::move(data)), EmbeddingSource::PrecomputedFile};
}

EmbeddingMatrix load_csv(std::istream& in, const std::filesystem::path& path,
                         std::optional<std::size_t> expected_rows) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::size_t n = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) fail(ErrorKind::Format, "embedding CSV: bad number '" + cell + "' in " + path.string());
      if (!std::isfinite(v)) {
        fail(ErrorKind::Format, "embedding CSV: non-finite value at row " + std::to_string(rows) + " in " + path.string());
      }
      data.push_back(v);
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols || n == 0) {
      fail(ErrorKind::Format, "embedding CSV: row " + std::to_string(rows) + " has " + std::to_string(n) +
                                  " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::Format, "embedding CSV: no rows in " + path.string());
  check_rows(rows, expected_rows, path);
  return {Tensor2(rows, cols, std::move(data)), EmbeddingSource::PrecomputedFile};
}

}  // namespace

void save_embeddings(const std::filesystem::path& path, const Tensor2& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write embedding file: " + path.string());
  out.write(kMagic, 4);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  std::vector<unsigned char> buf(4 * m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      for (int i = 0; i < 4; ++i) buf[4 * c + i] = static_cast<unsigned char>(bits >> (8 * i));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) fail(ErrorKind::Io, "failed writing embedding file: " + path.string());
}

void save_embeddings_csv(const std::filesystem::path& path, const Tensor2& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write embedding file: " + path.string());
  out.precision(9);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open embedding file: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) {
    return load_binary(in, path, expected_rows);
  }
  if (in.gcount() == 4 && std::memcmp(magic, "GEM", 3) == 0) {
    fail(ErrorKind::Format, "embedding file: malformed header in " + path.string());
  }
  in.clear();
  in.seekg(0);
  return load_csv(in, path, expected_rows);
}

WordEmbeddingInit random_word_embeddings(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  WordEmbeddingInit init{Tensor2(vocab_size, dim), 0.0};
  for (double& v : init.vectors.values()) v = dist(rng);
  return init;
}

WordEmbeddingInit load_word_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                                       Rng& rng, std::size_t fallback_dim) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open word-embedding file: " + path.string());
  std::unordered_map<std::size_t, std::vector<double>> found;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (vec.empty()) fail(ErrorKind::Format, "word-embedding file: no values on line " + std::to_string(line_no));
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim) {
      std::ostringstream os;
      os << "word-embedding file " << path.string() << ": line " << line_no << " has dimension "
         << vec.size() << ", expected " << dim;
      fail(ErrorKind::Format, os.str());
    }
    if (auto id = vocab.find(token)) found.emplace(*id, std::move(vec));
  }
  if (dim == 0) dim = fallback_dim;
  // Draw the fallback for every row so the stream position does not depend on coverage.
  WordEmbeddingInit init = random_word_embeddings(vocab.size(), dim, rng);
  for (const auto& [id, vec] : found) std::copy(vec.begin(), vec.end(), init.vectors.row(id).begin());
  init.coverage = vocab.size() ? static_cast<double>(found.size()) / static_cast<double>(vocab.size()) : 0.0;
  return init;
}

}  // namespace glocom
