#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"

namespace glocom {

// Sparse BoW: header "D V NNZ", then NNZ lines "doc word count" (0-based ids).
void write_bow(const std::filesystem::path& path, const BowCorpus& corpus);
BowCorpus read_bow(const std::filesystem::path& path);

// One token per line.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

// One integer per line (labels, cluster ids, kept indices).
void write_ints(const std::filesystem::path& path, const std::vector<long long>& values);
std::vector<long long> read_ints(const std::filesystem::path& path);

std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// Comma-separated rows, 17 significant digits.
void write_csv(const std::filesystem::path& path, const Tensor2& m);
Tensor2 read_csv(const std::filesystem::path& path);

/// "topic_id w1 w2 ..." per line.
void write_topics(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& topics);
std::vector<std::vector<std::string>> read_topics(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace glocom
