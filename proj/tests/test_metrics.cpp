// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "seqdesc/errors.hpp"
#include "seqdesc/metrics.hpp"
#include "seqdesc/rng.hpp"

using namespace seqdesc;

namespace {

// ---------------------------------------------------------------------------
// brute-force oracles, written independently of src/metrics.cpp: n-grams are
// token vectors in ordered maps, similarities are computed by nested scans.
// ---------------------------------------------------------------------------

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> oracle_ngrams(const TokenList& tokens, std::size_t n) {
  std::map<Gram, std::size_t> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    out[Gram(tokens.begin() + i, tokens.begin() + i + n)] += 1;
  return out;
}

double oracle_bleu4(const TokenList& cand, const std::vector<TokenList>& refs) {
  if (cand.empty()) return 0.0;
  double logsum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (cand.size() < n) return 0.0;
    auto cg = oracle_ngrams(cand, n);
    std::size_t match = 0, total = cand.size() - n + 1;
    for (const auto& [gram, count] : cg) {
      std::size_t best = 0;
      for (const auto& ref : refs) {
        auto rg = oracle_ngrams(ref, n);
        auto it = rg.find(gram);
        if (it != rg.end()) best = std::max(best, it->second);
      }
      match += std::min(count, best);
    }
    double p = static_cast<double>(match);
    if (n > 1) p += 1e-9;  // zero-unigram candidates stay at 0
    if (p == 0.0) return 0.0;
    p /= static_cast<double>(total);
    if (p > 1.0) p = 1.0;
    logsum += std::log(p) / 4.0;
  }
  std::size_t c = cand.size(), r = refs[0].size();
  for (const auto& ref : refs) {
    auto d = [c](std::size_t l) { return l > c ? l - c : c - l; };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  double bp = c >= r ? 1.0 : std::exp(1.0 - double(r) / double(c));
  return bp * std::exp(logsum);
}

std::size_t oracle_lcs(const TokenList& a, const TokenList& b, std::size_t i,
                       std::size_t j,
                       std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
  if (i == a.size() || j == b.size()) return 0;
  auto key = std::make_pair(i, j);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  std::size_t best;
  if (a[i] == b[j])
    best = 1 + oracle_lcs(a, b, i + 1, j + 1, memo);
  else
    best = std::max(oracle_lcs(a, b, i + 1, j, memo), oracle_lcs(a, b, i, j + 1, memo));
  memo[key] = best;
  return best;
}

double oracle_rouge_l(const TokenList& cand, const std::vector<TokenList>& refs) {
  if (cand.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref : refs) {
    if (ref.empty()) continue;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    double lcs = static_cast<double>(oracle_lcs(cand, ref, 0, 0, memo));
    if (lcs == 0.0) continue;
    double p = lcs / cand.size(), r = lcs / ref.size();
    double b2 = 1.2 * 1.2;
    best = std::max(best, (1 + b2) * p * r / (r + b2 * p));
  }
  return best;
}

std::vector<double> oracle_cider_d(const std::vector<CaptionSet>& corpus) {
  std::map<Gram, double> df;
  for (const auto& video : corpus) {
    std::set<Gram> seen;
    for (const auto& ref : video.references)
      for (std::size_t n = 1; n <= 4; ++n)
        for (const auto& [g, c] : oracle_ngrams(ref, n)) seen.insert(g);
    for (const auto& g : seen) df[g] += 1.0;
  }
  double logn = corpus.size() == 1 ? 1.0 : std::log(double(corpus.size()));
  auto tfidf = [&](const TokenList& toks, std::size_t n) {
    std::map<Gram, double> vec;
    for (const auto& [g, c] : oracle_ngrams(toks, n)) {
      double d = df.count(g) ? df.at(g) : 0.0;
      vec[g] = double(c) * (logn - std::log(std::max(1.0, d)));
    }
    return vec;
  };
  auto norm = [](const std::map<Gram, double>& v) {
    double s = 0.0;
    for (const auto& [g, w] : v) s += w * w;
    return std::sqrt(s);
  };
  std::vector<double> out;
  for (const auto& video : corpus) {
    double total = 0.0;
    for (const auto& ref : video.references) {
      double pen = std::exp(
          -std::pow(double(video.candidate.size()) - double(ref.size()), 2) / (2.0 * 36.0));
      double sum_n = 0.0;
      for (std::size_t n = 1; n <= 4; ++n) {
        auto hv = tfidf(video.candidate, n);
        auto rv = tfidf(ref, n);
        double dot = 0.0;
        for (const auto& [g, w] : hv)
          if (rv.count(g)) dot += std::min(w, rv.at(g)) * rv.at(g);
        double denom = norm(hv) * norm(rv);
        sum_n += (denom > 0.0 ? dot / denom : 0.0) * pen;
      }
      total += sum_n / 4.0;
    }
    out.push_back(video.references.empty() ? 0.0 : 10.0 * total / video.references.size());
  }
  return out;
}

TokenList toks(std::initializer_list<const char*> words) {
  TokenList out;
  for (const char* w : words) out.emplace_back(w);
  return out;
}

std::vector<CaptionSet> golden_fixture() {
  // fixed five-video fixture; candidates range from perfect to disjoint
  std::vector<CaptionSet> corpus(5);
  corpus[0] = {"v0", tokenize("a man slices a ripe tomato in the kitchen"),
               {tokenize("a man slices a ripe tomato in the kitchen")}};
  corpus[1] = {"v1", tokenize("a man slices bread on the counter"),
               {tokenize("a man cuts bread on a wooden counter"),
                tokenize("someone slices a loaf of bread")}};
  corpus[2] = {"v2", tokenize("the dog runs the dog runs the dog runs across the yard"),
               {tokenize("a dog runs across the yard")}};
  corpus[3] = {"v3", tokenize("purple elephants compute tangents quietly"),
               {tokenize("a chef stirs soup in a large pot")}};
  corpus[4] = {"v4", tokenize("a woman pours water into a glass then drinks slowly"),
               {tokenize("a woman pours water into a glass and drinks")}};
  return corpus;
}

}  // namespace

TEST_CASE("tokenize: stated rules") {
  CHECK(tokenize("A man, smiling.") == toks({"a", "man", "smiling"}));
  CHECK(tokenize("") == TokenList{});
  CHECK(tokenize("It's 5 p.m.") == toks({"its", "5", "pm"}));
  CHECK(tokenize("  spaced\tout\nlines ") == toks({"spaced", "out", "lines"}));
  CHECK(tokenize("\xE2\x80\x9Cquoted\xE2\x80\x9D words") == toks({"quoted", "words"}));
}

TEST_CASE("bleu4: identity, disjoint, hand-counted example") {
  TokenList ref = tokenize("the cat sat on a mat");
  CHECK(bleu4(tokenize("the cat sat on a mat"), {ref}) == 1.0);
  CHECK(bleu4(tokenize("zebra quark nebula flux"), {ref}) == 0.0);
  CHECK(bleu4({}, {ref}) == 0.0);

  // clipped precisions 5/6, 3/5, 2/4, 1/3 -> (1/12)^(1/4) = 0.5372849659
  TokenList cand = tokenize("the cat sat on the mat");
  double expected = std::pow(1.0 / 12.0, 0.25);
  CHECK(std::abs(bleu4(cand, {ref}) - expected) <= 1e-8);
  CHECK(std::abs(bleu4(cand, {ref}) - 0.5372849659) <= 1e-8);
  CHECK(bleu4(cand, {ref}, /*smoothed=*/false) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bleu4: brevity penalty and smoothing behavior") {
  TokenList ref = tokenize("a b c d e f g h");
  TokenList half = tokenize("a b c d");
  double score = bleu4(half, {ref});
  // all precisions are 1; only the brevity penalty remains
  CHECK(score == doctest::Approx(std::exp(1.0 - 8.0 / 4.0)).epsilon(1e-9));

  // no shared 3- or 4-gram: zero without smoothing, tiny but positive with it
  TokenList near = tokenize("a b x c d");
  TokenList short_ref = tokenize("a b c d e");
  CHECK(bleu4(near, {short_ref}, false) == 0.0);
  CHECK(bleu4(near, {short_ref}, true) > 0.0);
  CHECK(bleu4(near, {short_ref}, true) < 0.1);
}

TEST_CASE("bleu4 matches the brute-force oracle on random inputs") {
  RngStream rng(derive_key(2019, "bleu-fuzz"));
  std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 300; ++trial) {
    auto draw = [&](std::size_t max_len) {
      TokenList t;
      std::size_t len = rng.below(static_cast<std::uint32_t>(max_len + 1));
      for (std::size_t i = 0; i < len; ++i) t.push_back(alphabet[rng.below(5)]);
      return t;
    };
    TokenList cand = draw(12);
    std::vector<TokenList> refs;
    std::size_t n_refs = 1 + rng.below(2);
    for (std::size_t i = 0; i < n_refs; ++i) {
      TokenList r = draw(12);
      if (r.empty()) r.push_back("a");
      refs.push_back(r);
    }
    CHECK(bleu4(cand, refs) == doctest::Approx(oracle_bleu4(cand, refs)).epsilon(1e-9));
  }
}

TEST_CASE("rouge_l: identity, disjoint, stated formula") {
  TokenList ref = toks({"a", "c"});
  CHECK(rouge_l(toks({"a", "b", "c"}), {toks({"a", "b", "c"})}) == 1.0);
  CHECK(rouge_l(toks({"x", "y"}), {ref}) == 0.0);
  CHECK(rouge_l({}, {ref}) == 0.0);
  // LCS = 2, P = 2/3, R = 1, beta = 1.2
  double p = 2.0 / 3.0, r = 1.0, b2 = 1.44;
  double expected = (1 + b2) * p * r / (r + b2 * p);
  CHECK(rouge_l(toks({"a", "b", "c"}), {ref}) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(rouge_l(toks({"a", "b", "c"}), {ref}) - 0.8299319728) < 1e-9);
}

TEST_CASE("rouge_l matches the recursive-memo oracle on random inputs") {
  RngStream rng(derive_key(2019, "rouge-fuzz"));
  std::vector<std::string> alphabet = {"a", "b", "c"};
  for (int trial = 0; trial < 200; ++trial) {
    auto draw = [&](std::size_t len) {
      TokenList t;
      for (std::size_t i = 0; i < len; ++i) t.push_back(alphabet[rng.below(3)]);
      return t;
    };
    TokenList cand = draw(1 + rng.below(10));
    std::vector<TokenList> refs = {draw(1 + rng.below(10)), draw(1 + rng.below(10))};
    CHECK(rouge_l(cand, refs) == doctest::Approx(oracle_rouge_l(cand, refs)).epsilon(1e-12));
  }
}

TEST_CASE("cider_d: identity scores 10, disjoint scores 0") {
  // identical candidate/reference with >= 4 tokens and some non-shared grams
  std::vector<CaptionSet> corpus(2);
  corpus[0] = {"a", tokenize("a man opens the red door slowly"),
               {tokenize("a man opens the red door slowly")}};
  corpus[1] = {"b", tokenize("a woman reads a thick book quietly"),
               {tokenize("a woman reads a thick book quietly")}};
  auto scores = cider_d(corpus);
  CHECK(scores[0] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(scores[1] == doctest::Approx(10.0).epsilon(1e-9));

  corpus[0].candidate = tokenize("zeppelin quartz uproar vivid");
  scores = cider_d(corpus);
  CHECK(scores[0] == doctest::Approx(0.0).epsilon(1e-12));

  // single-video corpus: idf degenerates but identity still scores 10
  std::vector<CaptionSet> single(1);
  single[0] = {"only", tokenize("a person opens the box and waves"),
               {tokenize("a person opens the box and waves")}};
  CHECK(cider_d(single)[0] == doctest::Approx(10.0).epsilon(1e-9));

  CHECK_THROWS_AS(cider_d({}), InputError);
}

TEST_CASE("cider_d matches the brute-force oracle on mini-corpora") {
  RngStream rng(derive_key(2019, "cider-fuzz"));
  std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n_videos = 2 + rng.below(3);
    std::vector<CaptionSet> corpus(n_videos);
    for (std::size_t v = 0; v < n_videos; ++v) {
      auto draw = [&](std::size_t max_len) {
        TokenList t;
        std::size_t len = 1 + rng.below(static_cast<std::uint32_t>(max_len));
        for (std::size_t i = 0; i < len; ++i) t.push_back(alphabet[rng.below(6)]);
        return t;
      };
      corpus[v].video_id = "v" + std::to_string(v);
      corpus[v].candidate = draw(10);
      std::size_t n_refs = 1 + rng.below(2);
      for (std::size_t r = 0; r < n_refs; ++r) corpus[v].references.push_back(draw(10));
    }
    auto fast = cider_d(corpus);
    auto slow = oracle_cider_d(corpus);
    for (std::size_t v = 0; v < n_videos; ++v)
      CHECK(fast[v] == doctest::Approx(slow[v]).epsilon(1e-9));
  }
}

TEST_CASE("div_n: manual counts and edge cases") {
  CHECK(div2(toks({"a", "a", "b"})) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  TokenList distinct = toks({"p", "q", "r", "s", "t"});
  CHECK(div2(distinct) == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
  CHECK(div2({}) == 0.0);
  CHECK(div2(toks({"solo"})) == 0.0);
  CHECK(div_n(toks({"a", "a", "b"}), 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("re4: manual sliding-window counts") {
  CHECK(re4(toks({"a", "b", "c", "d"})) == 0.0);
  CHECK(re4({}) == 0.0);
  CHECK(re4(toks({"a", "b", "c"})) == 0.0);

  // [a b c d] repeated 3x: 9 windows, counts {abcd:3, bcda:2, cdab:2, dabc:2}
  TokenList rep;
  for (int k = 0; k < 3; ++k)
    for (const char* w : {"a", "b", "c", "d"}) rep.emplace_back(w);
  CHECK(re4(rep) == doctest::Approx(5.0 / 9.0).epsilon(1e-12));

  // k repeats tend to 1: (4k - 3 - distinct) / (4k - 3)
  for (int k = 2; k <= 8; ++k) {
    TokenList many;
    for (int i = 0; i < k; ++i)
      for (const char* w : {"a", "b", "c", "d"}) many.emplace_back(w);
    double windows = 4.0 * k - 3.0;
    CHECK(re4(many) == doctest::Approx((windows - 4.0) / windows).epsilon(1e-12));
  }
}

TEST_CASE("corpus_report: single video, two-video mean, input validation") {
  std::vector<CaptionSet> one(1);
  one[0] = {"only", tokenize("a person opens the box and waves"),
            {tokenize("a person opens the box and waves")}};
  MetricReport r1 = corpus_report(one);
  CHECK(r1.per_video.size() == 1);
  CHECK(r1.corpus_mean.bleu4 == r1.per_video[0].bleu4);
  CHECK(r1.corpus_mean.cider_d == r1.per_video[0].cider_d);

  auto corpus = golden_fixture();
  MetricReport r5 = corpus_report(corpus);
  double mean_b = 0.0;
  for (const auto& row : r5.per_video) mean_b += row.bleu4;
  CHECK(r5.corpus_mean.bleu4 == doctest::Approx(mean_b / 5.0).epsilon(1e-12));

  CHECK_THROWS_AS(corpus_report({}), InputError);
  std::vector<CaptionSet> no_refs(1);
  no_refs[0] = {"bad", tokenize("something"), {}};
  CHECK_THROWS_AS(corpus_report(no_refs), InputError);
}

TEST_CASE("golden five-video fixture: frozen oracle-generated values") {
  auto corpus = golden_fixture();
  MetricReport report = corpus_report(corpus);

  // regenerate with the in-test oracles; the implementation must agree
  auto oracle_scores = oracle_cider_d(corpus);
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    CHECK(report.per_video[v].bleu4 ==
          doctest::Approx(oracle_bleu4(corpus[v].candidate, corpus[v].references))
              .epsilon(1e-9));
    CHECK(report.per_video[v].rouge_l ==
          doctest::Approx(oracle_rouge_l(corpus[v].candidate, corpus[v].references))
              .epsilon(1e-9));
    CHECK(report.per_video[v].cider_d == doctest::Approx(oracle_scores[v]).epsilon(1e-9));
  }

  // frozen golden rows (bleu4, rouge_l, cider_d, div2, re4), generated once
  // from the oracles above; refreshed only if the fixture text changes
  const double golden[5][5] = {
      {1.0, 1.0, 10.0, 0.88888888888888884, 0.0},
      {1.0932651141113048e-05, 0.65874730021598282, 1.566219353638759,
       0.8571428571428571, 0.0},
      {0.3170233139540547, 0.5910852713178294, 2.1314627618755004, 0.5,
       0.33333333333333331},
      {0.0, 0.0, 0.0, 0.80000000000000004, 0.0},
      {0.66063286372525376, 0.85017421602787446, 6.889290377013503,
       0.90000000000000002, 0.0}};
  for (std::size_t v = 0; v < 5; ++v) {
    CHECK(report.per_video[v].bleu4 == doctest::Approx(golden[v][0]).epsilon(1e-9));
    CHECK(report.per_video[v].rouge_l == doctest::Approx(golden[v][1]).epsilon(1e-9));
    CHECK(report.per_video[v].cider_d == doctest::Approx(golden[v][2]).epsilon(1e-9));
    CHECK(report.per_video[v].div2 == doctest::Approx(golden[v][3]).epsilon(1e-9));
    CHECK(report.per_video[v].re4 == doctest::Approx(golden[v][4]).epsilon(1e-9));
  }
}

TEST_CASE("range bounds hold on fuzzed corpora") {
  RngStream rng(derive_key(2019, "bounds-fuzz"));
  std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f", "g", "h"};
  const int corpora = 50, per_corpus = 20;  // full 1e4-set sweep lives in acceptance
  for (int cidx = 0; cidx < corpora; ++cidx) {
    std::vector<CaptionSet> corpus(per_corpus);
    for (int v = 0; v < per_corpus; ++v) {
      auto draw = [&](std::size_t max_len, bool allow_empty) {
        TokenList t;
        std::size_t len = rng.below(static_cast<std::uint32_t>(max_len + 1));
        if (!allow_empty && len == 0) len = 1;
        for (std::size_t i = 0; i < len; ++i) t.push_back(alphabet[rng.below(8)]);
        return t;
      };
      corpus[v].video_id = "v" + std::to_string(v);
      corpus[v].candidate = draw(16, true);
      std::size_t n_refs = 1 + rng.below(3);
      for (std::size_t r = 0; r < n_refs; ++r) corpus[v].references.push_back(draw(16, false));
    }
    MetricReport report = corpus_report(corpus);
    for (const auto& row : report.per_video) {
      CHECK(row.bleu4 >= 0.0);
      CHECK(row.bleu4 <= 1.0);
      CHECK(row.rouge_l >= 0.0);
      CHECK(row.rouge_l <= 1.0);
      CHECK(row.cider_d >= 0.0);
      CHECK(row.cider_d <= 10.0);
      CHECK(row.div2 >= 0.0);
      CHECK(row.re4 >= 0.0);
      CHECK(row.re4 <= 1.0);
    }
  }
}

TEST_CASE("appending a non-overlapping token strictly degrades perfect scores") {
  TokenList ref = tokenize("a person opens the box and waves twice");
  TokenList perfect = ref;
  TokenList worse = ref;
  worse.push_back("zzzz");
  CHECK(bleu4(perfect, {ref}) == 1.0);
  CHECK(bleu4(worse, {ref}) < 1.0);
  CHECK(rouge_l(worse, {ref}) < 1.0);
}

TEST_CASE("per-video scores are independent of corpus ordering") {
  auto corpus = golden_fixture();
  MetricReport fwd = corpus_report(corpus);
  std::vector<CaptionSet> reversed(corpus.rbegin(), corpus.rend());
  MetricReport rev = corpus_report(reversed);
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    const auto& a = fwd.per_video[v];
    const auto& b = rev.per_video[corpus.size() - 1 - v];
    CHECK(a.video_id == b.video_id);
    CHECK(a.bleu4 == b.bleu4);
    CHECK(a.cider_d == b.cider_d);
  }
}

TEST_CASE("report csv and json render with the pinned column order") {
  auto corpus = golden_fixture();
  MetricReport report = corpus_report(corpus);
  std::ostringstream csv;
  write_report_csv(csv, report);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "video_id,bleu4,rouge_l,cider_d,div2,re4");
  std::string line, last;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    last = line;
    ++rows;
  }
  CHECK(rows == 6);  // 5 videos + corpus mean
  CHECK(last.rfind("corpus_mean,", 0) == 0);

  std::ostringstream js;
  write_report_json(js, report);
  CHECK(js.str().find("\"videos\"") != std::string::npos);
  CHECK(js.str().find("\"div1\"") != std::string::npos);
}
