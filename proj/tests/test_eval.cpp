#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "glocom/error.hpp"
#include "glocom/eval.hpp"
#include "support.hpp"

using namespace glocom;

namespace {

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

double nmi_contingency(const std::vector<int>& a, const std::vector<int>& b) {
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

}  // namespace

TEST_CASE("topic diversity hand cases") {
  CHECK(topic_diversity({{"a", "b", "c"}, {"d", "e", "f"}}) == 1.0);
  CHECK(topic_diversity({{"a", "b", "c"}, {"a", "d", "e"}}) == doctest::Approx(5.0 / 6.0));
  CHECK(topic_diversity({{"a", "b"}, {"a", "b"}, {"a", "b"}}) == doctest::Approx(1.0 / 3.0));
  CHECK(topic_diversity({{"c", "a", "b"}, {"e", "d", "a"}}) == topic_diversity({{"a", "d", "e"}, {"a", "b", "c"}}));
  CHECK_THROWS_AS(topic_diversity({}), Error);
  CHECK_THROWS_AS(topic_diversity({{"a", "b"}, {"c"}}), Error);
}

TEST_CASE("purity and NMI reference values") {
  const std::vector<int> gold{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabeled{5, 5, 3, 3, 9, 9};
  CHECK(purity(relabeled, gold) == 1.0);
  CHECK(nmi(relabeled, gold) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(purity(std::vector<int>(4, 0), std::vector<int>{0, 0, 1, 1}) == 0.5);

  // product contingency: every (cluster, class) pair appears once
  CHECK(std::abs(nmi(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1})) < 1e-12);
  CHECK(nmi(std::vector<int>(3, 1), std::vector<int>(3, 4)) == 0.0);

  CHECK_THROWS_AS(purity(std::vector<int>{0}, std::vector<int>{0, 1}), Error);
  CHECK_THROWS_AS(nmi(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST_CASE("twelve-document NMI against a contingency table") {
  const std::vector<int> pred{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> gold{0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 0, 0};
  // counts: c0 {0:3,1:1}, c1 {1:3,2:1}, c2 {2:2,0:2}; classes 0:5, 1:4, 2:3
  const double n = 12.0;
  const double mi = (3 / n) * std::log((3 / n) / ((4 / n) * (5 / n))) + (1 / n) * std::log((1 / n) / ((4 / n) * (4 / n))) +
                    (3 / n) * std::log((3 / n) / ((4 / n) * (4 / n))) + (1 / n) * std::log((1 / n) / ((4 / n) * (3 / n))) +
                    (2 / n) * std::log((2 / n) / ((4 / n) * (3 / n))) + (2 / n) * std::log((2 / n) / ((4 / n) * (5 / n)));
  const double hp = std::log(3.0);
  const double hg = -(5 / n) * std::log(5 / n) - (4 / n) * std::log(4 / n) - (3 / n) * std::log(3 / n);
  CHECK(nmi(pred, gold) == doctest::Approx(mi / (0.5 * (hp + hg))).epsilon(1e-12));
  CHECK(purity(pred, gold) == doctest::Approx(8.0 / 12.0));
}

TEST_CASE("random instances against brute force") {
  Rng rng(123);
  std::uniform_int_distribution<int> cl(0, 4), cls(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> pred(20), gold(20);
    for (auto& p : pred) p = cl(rng);
    for (auto& g : gold) g = cls(rng);
    CHECK(purity(pred, gold) == purity_brute(pred, gold));
    CHECK(std::abs(nmi(pred, gold) - nmi_contingency(pred, gold)) < 1e-9);
    CHECK(nmi(pred, gold) == doctest::Approx(nmi(gold, pred)).epsilon(1e-12));

    std::vector<int> perm{3, 0, 4, 1, 2};
    std::vector<int> renamed(20);
    for (std::size_t i = 0; i < 20; ++i) renamed[i] = perm[pred[i]];
    CHECK(purity(renamed, gold) == purity(pred, gold));
    CHECK(nmi(renamed, gold) == doctest::Approx(nmi(pred, gold)).epsilon(1e-12));

    const double p = purity(pred, gold), m = nmi(pred, gold);
    CHECK((p >= 0.0 && p <= 1.0));
    CHECK((m >= -1e-12 && m <= 1.0 + 1e-12));
  }
}

TEST_CASE("argmax rows breaks ties low") {
  const Tensor2 theta(3, 3, {0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8});
  CHECK(argmax_rows(theta) == std::vector<int>{1, 0, 2});
}

TEST_CASE("NPMI") {
  // words: 0 a, 1 b, 2 c, 3 d
  const Vocabulary vocab(std::vector<std::string>{"a", "b", "c", "d"});
  const BowCorpus ref(4, {{{0, 1}, {1, 1}},
                          {{0, 2}, {1, 1}, {2, 1}},
                          {{2, 1}, {3, 1}},
                          {{3, 3}},
                          {{0, 1}, {3, 1}}});

  SUBCASE("hand-counted probabilities") {
    // a: docs {0,1,4}; b: {0,1}; c: {1,2}; d: {2,3,4}
    auto npmi_pair = [](double nab, double na, double nb) {
      const double pab = (nab + kNpmiSmoothing) / 5.0;
      return (std::log(pab) - std::log((na / 5.0) * (nb / 5.0))) / -std::log(pab);
    };
    const double ab = npmi_pair(2, 3, 2), ac = npmi_pair(1, 3, 2), bc = npmi_pair(1, 2, 2);
    const NpmiResult r = npmi_coherence({{"a", "b", "c"}}, ref, vocab);
    CHECK(std::abs(r.mean - (ab + ac + bc) / 3.0) < 1e-9);
    REQUIRE(r.per_topic.size() == 1);

    const NpmiResult two = npmi_coherence({{"a", "b"}, {"c", "d"}}, ref, vocab);
    CHECK(std::abs(two.per_topic[0] - ab) < 1e-9);
    CHECK(std::abs(two.per_topic[1] - npmi_pair(1, 2, 3)) < 1e-9);
    CHECK(two.mean == doctest::Approx(0.5 * (two.per_topic[0] + two.per_topic[1])));
  }

  SUBCASE("always together gives one") {
    const Vocabulary v(std::vector<std::string>{"x", "y", "z"});
    const BowCorpus r(3, {{{0, 1}, {1, 1}}, {{2, 1}}, {{0, 2}, {1, 1}}, {{2, 2}}});
    CHECK(std::abs(npmi_coherence({{"x", "y"}}, r, v).mean - 1.0) < 1e-9);
  }

  SUBCASE("never together or unknown words score the floor") {
    CHECK(npmi_coherence({{"b", "d"}}, ref, vocab).mean == -1.0);
    CHECK(npmi_coherence({{"a", "zzz"}}, ref, vocab).mean == -1.0);
  }

  SUBCASE("pair values stay in range") {
    Rng rng(5);
    const BowCorpus big = testing::random_corpus(4, 30, rng, 3);
    const NpmiResult r = npmi_coherence({{"a", "b", "c", "d"}}, big, vocab);
    CHECK((r.mean >= -1.0 && r.mean <= 1.0));
  }
}

TEST_CASE("metrics json") {
  Metrics m;
  m.td = 0.5;
  m.purity = 0.25;
  m.npmi = -0.125;
  m.npmi_per_topic = {0.5, -0.75};
  const std::string s = metrics_json(m);
  CHECK(s.find("\"td\"") != std::string::npos);
  CHECK(s.find("\"purity\"") != std::string::npos);
  CHECK(s.find("\"npmi_per_topic\"") != std::string::npos);
  CHECK(s.find("-0.75") != std::string::npos);
  CHECK(metrics_json(m) == s);
}
