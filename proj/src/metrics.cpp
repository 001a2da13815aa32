// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "seqdesc/errors.hpp"
#include "seqdesc/textio.hpp"

namespace seqdesc {

namespace {

constexpr std::size_t kMaxOrder = 4;        // BLEU / CIDEr n-gram orders
constexpr double kRougeBeta = 1.2;
constexpr double kCiderLengthSigma = 6.0;
constexpr double kBleuEpsilon = 1e-9;

// Some punctuation lives outside ASCII; cover the common UTF-8 blocks
// (general punctuation U+2010..U+205E plus a few stray quote marks).
bool is_unicode_punct(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  if (cp >= 0x2010 && cp <= 0x205E) return true;
  switch (cp) {
    case 0x00A1: case 0x00BF: case 0x00AB: case 0x00BB:
      return true;
    default:
      return false;
  }
}

// Minimal UTF-8 decode; malformed bytes are treated as single characters.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t extra = 0;
  char32_t cp = c;
  if (c >= 0xF0) { extra = 3; cp = c & 0x07; }
  else if (c >= 0xE0) { extra = 2; cp = c & 0x0F; }
  else if (c >= 0xC0) { extra = 1; cp = c & 0x1F; }
  if (i + extra >= s.size()) extra = 0;
  for (std::size_t k = 1; k <= extra; ++k)
    cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  i += extra;
  return cp;
}

// n-grams keyed by tokens joined with an unprintable separator
using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts ngram_counts(const TokenList& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1F';
      key += tokens[i + k];
    }
    counts[key] += 1;
  }
  return counts;
}

std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

MetricRow mean_row(const std::vector<MetricRow>& rows) {
  MetricRow mean;
  mean.video_id = "corpus_mean";
  if (rows.empty()) return mean;
  for (const auto& r : rows) {
    mean.bleu4 += r.bleu4;
    mean.rouge_l += r.rouge_l;
    mean.cider_d += r.cider_d;
    mean.div1 += r.div1;
    mean.div2 += r.div2;
    mean.re4 += r.re4;
  }
  double n = static_cast<double>(rows.size());
  mean.bleu4 /= n;
  mean.rouge_l /= n;
  mean.cider_d /= n;
  mean.div1 /= n;
  mean.div2 /= n;
  mean.re4 /= n;
  return mean;
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t cp_start = i;
    char32_t cp = decode_utf8(text, i);  // advances i to the last byte
    if (cp < 0x80 && std::isspace(static_cast<int>(cp))) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
      continue;
    }
    if (is_unicode_punct(cp)) continue;
    if (cp < 0x80) {
      current.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
      // pass non-ASCII letters through unchanged (no Unicode case folding)
      current.append(text.substr(cp_start, i - cp_start + 1));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

double bleu4(const TokenList& candidate, const std::vector<TokenList>& references,
             bool smoothed) {
  if (candidate.empty() || references.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    NgramCounts cand = ngram_counts(candidate, n);
    std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    if (total == 0) return 0.0;  // candidate too short for this order
    NgramCounts max_ref;
    for (const auto& ref : references)
      for (const auto& [gram, count] : ngram_counts(ref, n))
        max_ref[gram] = std::max(max_ref[gram], count);
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    double numerator = static_cast<double>(clipped);
    // epsilon smoothing lifts missing higher orders; a candidate with zero
    // unigram overlap still scores 0
    if (smoothed && n > 1) numerator += kBleuEpsilon;
    if (numerator == 0.0) return 0.0;
    double precision = std::min(1.0, numerator / static_cast<double>(total));
    log_sum += std::log(precision);
  }
  double geo = std::exp(log_sum / static_cast<double>(kMaxOrder));
  // closest reference length; ties resolved toward the shorter reference
  std::size_t c = candidate.size();
  std::size_t r = references[0].size();
  for (const auto& ref : references) {
    std::size_t len = ref.size();
    auto dist = [c](std::size_t l) {
      return l > c ? l - c : c - l;
    };
    if (dist(len) < dist(r) || (dist(len) == dist(r) && len < r)) r = len;
  }
  double bp = c >= r ? 1.0
                     : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return geo * bp;
}

double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references) {
  if (candidate.empty() || references.empty()) return 0.0;
  double best = 0.0;
  double beta2 = kRougeBeta * kRougeBeta;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    std::size_t lcs = lcs_length(candidate, ref);
    if (lcs == 0) continue;
    double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    double f = (1.0 + beta2) * p * r / (r + beta2 * p);
    best = std::max(best, f);
  }
  return best;
}

std::vector<double> cider_d(const std::vector<CaptionSet>& corpus) {
  if (corpus.empty()) throw InputError("cider_d: empty corpus");

  // document frequency over each video's reference set
  NgramCounts df;
  for (const auto& video : corpus) {
    std::unordered_set<std::string> seen;
    for (const auto& ref : video.references)
      for (std::size_t n = 1; n <= kMaxOrder; ++n)
        for (const auto& [gram, count] : ngram_counts(ref, n)) seen.insert(gram);
    for (const auto& gram : seen) df[gram] += 1;
  }
  double log_corpus = corpus.size() == 1
                          ? 1.0
                          : std::log(static_cast<double>(corpus.size()));

  struct TfIdf {
    std::unordered_map<std::string, double> vec[kMaxOrder];
    double norm[kMaxOrder] = {0, 0, 0, 0};
    std::size_t length = 0;
  };
  auto vectorize = [&](const TokenList& tokens) {
    TfIdf out;
    out.length = tokens.size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      for (const auto& [gram, count] : ngram_counts(tokens, n)) {
        auto it = df.find(gram);
        double seen = it == df.end() ? 0.0 : static_cast<double>(it->second);
        double idf = log_corpus - std::log(std::max(1.0, seen));
        double w = static_cast<double>(count) * idf;
        out.vec[n - 1][gram] = w;
        out.norm[n - 1] += w * w;
      }
      out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
    }
    return out;
  };

  std::vector<double> scores;
  scores.reserve(corpus.size());
  for (const auto& video : corpus) {
    TfIdf cand = vectorize(video.candidate);
    double acc_over_refs = 0.0;
    for (const auto& ref : video.references) {
      TfIdf rv = vectorize(ref);
      double delta = static_cast<double>(cand.length) - static_cast<double>(rv.length);
      double penalty =
          std::exp(-(delta * delta) / (2.0 * kCiderLengthSigma * kCiderLengthSigma));
      double mean_over_n = 0.0;
      for (std::size_t n = 0; n < kMaxOrder; ++n) {
        double sim = 0.0;
        for (const auto& [gram, w] : cand.vec[n]) {
          auto it = rv.vec[n].find(gram);
          if (it != rv.vec[n].end()) sim += std::min(w, it->second) * it->second;
        }
        if (cand.norm[n] > 0.0 && rv.norm[n] > 0.0)
          sim /= cand.norm[n] * rv.norm[n];
        else
          sim = 0.0;
        mean_over_n += sim * penalty;
      }
      acc_over_refs += mean_over_n / static_cast<double>(kMaxOrder);
    }
    double score = video.references.empty()
                       ? 0.0
                       : 10.0 * acc_over_refs / static_cast<double>(video.references.size());
    scores.push_back(score);
  }
  return scores;
}

double div_n(const TokenList& paragraph, std::size_t n) {
  if (n == 0 || paragraph.size() < n) return 0.0;
  NgramCounts grams = ngram_counts(paragraph, n);
  return static_cast<double>(grams.size()) / static_cast<double>(paragraph.size());
}

double re4(const TokenList& paragraph) {
  NgramCounts grams = ngram_counts(paragraph, 4);
  if (grams.empty()) return 0.0;
  std::size_t total = 0, repeated = 0;
  for (const auto& [gram, count] : grams) {
    total += count;
    repeated += count - 1;
  }
  return static_cast<double>(repeated) / static_cast<double>(total);
}

MetricReport corpus_report(const std::vector<CaptionSet>& corpus, bool smoothed_bleu) {
  if (corpus.empty()) throw InputError("corpus_report: empty corpus");
  for (const auto& video : corpus)
    if (video.references.empty())
      throw InputError("corpus_report: video '" + video.video_id +
                       "' has no references");
  std::vector<double> cider = cider_d(corpus);
  MetricReport report;
  report.per_video.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& video = corpus[i];
    MetricRow row;
    row.video_id = video.video_id;
    row.bleu4 = bleu4(video.candidate, video.references, smoothed_bleu);
    row.rouge_l = rouge_l(video.candidate, video.references);
    row.cider_d = cider[i];
    row.div1 = div_n(video.candidate, 1);
    row.div2 = div_n(video.candidate, 2);
    row.re4 = re4(video.candidate);
    report.per_video.push_back(std::move(row));
  }
  report.corpus_mean = mean_row(report.per_video);
  return report;
}

std::vector<CaptionSet> load_caption_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open caption file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed caption file " + path + ": " + e.what());
  }
  if (!doc.is_object())
    throw InputError("caption file must be a JSON object keyed by video id: " + path);
  std::vector<CaptionSet> corpus;
  for (const auto& [video_id, entry] : doc.items()) {
    if (!entry.is_object() || !entry.contains("candidate") || !entry.contains("references"))
      throw InputError("caption entry '" + video_id +
                       "' needs 'candidate' and 'references' fields");
    CaptionSet set;
    set.video_id = video_id;
    set.candidate = tokenize(entry["candidate"].get<std::string>());
    for (const auto& ref : entry["references"])
      set.references.push_back(tokenize(ref.get<std::string>()));
    if (set.references.empty())
      throw InputError("caption entry '" + video_id + "' has no references");
    corpus.push_back(std::move(set));
  }
  return corpus;
}

void write_report_csv(std::ostream& out, const MetricReport& report) {
  out << "video_id,bleu4,rouge_l,cider_d,div2,re4\n";
  auto put = [&out](const MetricRow& row) {
    out << row.video_id << ',' << format_double(row.bleu4) << ','
        << format_double(row.rouge_l) << ',' << format_double(row.cider_d) << ','
        << format_double(row.div2) << ',' << format_double(row.re4) << '\n';
  };
  for (const auto& row : report.per_video) put(row);
  put(report.corpus_mean);
}

void write_report_json(std::ostream& out, const MetricReport& report) {
  nlohmann::ordered_json doc;
  auto row_json = [](const MetricRow& row) {
    nlohmann::ordered_json j;
    j["video_id"] = row.video_id;
    j["bleu4"] = row.bleu4;
    j["rouge_l"] = row.rouge_l;
    j["cider_d"] = row.cider_d;
    j["div1"] = row.div1;
    j["div2"] = row.div2;
    j["re4"] = row.re4;
    return j;
  };
  doc["videos"] = nlohmann::ordered_json::array();
  for (const auto& row : report.per_video) doc["videos"].push_back(row_json(row));
  doc["corpus_mean"] = row_json(report.corpus_mean);
  out << doc.dump(2) << '\n';
}

}  // namespace seqdesc
