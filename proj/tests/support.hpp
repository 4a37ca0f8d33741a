#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "glocom/corpus.hpp"
#include "glocom/numerics.hpp"
#include "glocom/rng.hpp"

namespace testing {

using glocom::Rng;
using glocom::Tensor2;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("glocom_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Tensor2 random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

/// Central differences of a scalar function of `x`, perturbing x in place.
inline Tensor2 numeric_grad(const std::function<double()>& f, Tensor2& x, double h = 1e-4) {
  Tensor2 g(x.rows(), x.cols());
  auto xv = x.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double orig = xv[i];
    xv[i] = orig + h;
    const double fp = f();
    xv[i] = orig - h;
    const double fm = f();
    xv[i] = orig;
    gv[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest entrywise |a − n| / max(|a|, |n|, floor).
inline double max_rel_error(const Tensor2& analytic, const Tensor2& numeric, double floor = 1e-6) {
  double worst = 0.0;
  auto a = analytic.values();
  auto n = numeric.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

/// Σ R ⊙ Y, the usual probe turning a tensor-valued map into a scalar.
inline double probe(const Tensor2& y, const Tensor2& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * r.values()[i];
  return s;
}

/// D documents over V words with 2..max_len distinct words each.
inline glocom::BowCorpus random_corpus(std::size_t V, std::size_t D, Rng& rng, std::size_t max_len = 8) {
  std::uniform_int_distribution<std::size_t> word(0, V - 1);
  std::uniform_int_distribution<std::size_t> len(2, max_len);
  std::uniform_int_distribution<std::uint32_t> count(1, 3);
  std::vector<glocom::SparseDoc> docs(D);
  for (auto& d : docs) {
    const std::size_t n = len(rng);
    while (true) {
      d.clear();
      for (std::size_t i = 0; i < n; ++i) d.push_back({static_cast<std::uint32_t>(word(rng)), count(rng)});
      std::sort(d.begin(), d.end(), [](auto& a, auto& b) { return a.word < b.word; });
      std::size_t distinct = 0;
      for (std::size_t i = 0; i < d.size(); ++i) distinct += (i == 0 || d[i].word != d[i - 1].word);
      if (distinct >= 2) break;
    }
  }
  return glocom::BowCorpus(V, std::move(docs));
}

}  // namespace testing
