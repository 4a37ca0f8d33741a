#include "glocom/formats.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "glocom/error.hpp"

namespace glocom {

namespace {

std::ifstream open_in(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, std::string("cannot open ") + what + ": " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, const char* what) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, std::string("cannot write ") + what + ": " + path.string());
  return out;
}

}  // namespace

void write_bow(const std::filesystem::path& path, const BowCorpus& corpus) {
  auto out = open_out(path, "BoW file");
  out << corpus.num_docs() << ' ' << corpus.vocab_size() << ' ' << corpus.nnz() << '\n';
  for (std::size_t d = 0; d < corpus.num_docs(); ++d) {
    for (const auto& e : corpus.doc(d)) out << d << ' ' << e.word << ' ' << e.count << '\n';
  }
}

BowCorpus read_bow(const std::filesystem::path& path) {
  auto in = open_in(path, "BoW file");
  std::size_t n_docs = 0, vocab = 0, nnz = 0;
  if (!(in >> n_docs >> vocab >> nnz)) fail(ErrorKind::Format, "BoW file: malformed header in " + path.string());
  std::vector<SparseDoc> docs(n_docs);
  for (std::size_t i = 0; i < nnz; ++i) {
    std::size_t d = 0, w = 0;
    long long c = 0;
    if (!(in >> d >> w >> c)) {
      fail(ErrorKind::Format, "BoW file: expected " + std::to_string(nnz) + " entries, read " + std::to_string(i));
    }
    if (d >= n_docs || w >= vocab || c <= 0) {
      fail(ErrorKind::Format, "BoW file: invalid entry " + std::to_string(i) + " in " + path.string());
    }
    docs[d].push_back({static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(c)});
  }
  return BowCorpus(vocab, std::move(docs));
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto out = open_out(path, "vocabulary");
  for (const auto& w : vocab.words()) out << w << '\n';
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  auto in = open_in(path, "vocabulary");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return Vocabulary(std::move(words));
}

void write_ints(const std::filesystem::path& path, const std::vector<long long>& values) {
  auto out = open_out(path, "integer list");
  for (auto v : values) out << v << '\n';
}

std::vector<long long> read_ints(const std::filesystem::path& path) {
  auto in = open_in(path, "integer list");
  std::vector<long long> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long v = 0;
    std::string rest;
    if (!(ls >> v) || (ls >> rest)) {
      fail(ErrorKind::Format, path.string() + ": line " + std::to_string(line_no) + " is not an integer");
    }
    values.push_back(v);
  }
  return values;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  auto raw = read_ints(path);
  return {raw.begin(), raw.end()};
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  write_ints(path, {labels.begin(), labels.end()});
}

void write_csv(const std::filesystem::path& path, const Tensor2& m) {
  auto out = open_out(path, "CSV file");
  out.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

Tensor2 read_csv(const std::filesystem::path& path) {
  auto m = load_embeddings(path, std::nullopt);
  return std::move(m.rows);
}

void write_topics(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& topics) {
  auto out = open_out(path, "topics file");
  for (std::size_t k = 0; k < topics.size(); ++k) {
    out << k;
    for (const auto& w : topics[k]) out << ' ' << w;
    out << '\n';
  }
}

std::vector<std::vector<std::string>> read_topics(const std::filesystem::path& path) {
  auto in = open_in(path, "topics file");
  std::vector<std::vector<std::string>> topics;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    topics.emplace_back(std::istream_iterator<std::string>(ls), std::istream_iterator<std::string>());
  }
  return topics;
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path, "file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, "file");
  out << text;
}

}  // namespace glocom
