// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace seqdesc {

using TokenList = std::vector<std::string>;

/// One scored video: a candidate paragraph and one or more references,
/// all tokenized.
struct CaptionSet {
  std::string video_id;
  TokenList candidate;
  std::vector<TokenList> references;
};

struct MetricRow {
  std::string video_id;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider_d = 0.0;
  double div1 = 0.0;
  double div2 = 0.0;
  double re4 = 0.0;
};

/// Per-video rows plus the corpus row of arithmetic means.
struct MetricReport {
  std::vector<MetricRow> per_video;
  MetricRow corpus_mean;
};

/// Lowercases, strips punctuation characters, splits on whitespace.
TokenList tokenize(std::string_view text);

/// Geometric mean of clipped n-gram precisions (n = 1..4) times the brevity
/// penalty exp(1 - r/c) when c < r, with r the closest reference length.
/// With `smoothed` (default) zero match counts are lifted by 1e-9 so one
/// missing order does not zero short captions. Empty candidate scores 0.
double bleu4(const TokenList& candidate, const std::vector<TokenList>& references,
             bool smoothed = true);

/// LCS-based F-measure with beta = 1.2; maximum over references.
double rouge_l(const TokenList& candidate, const std::vector<TokenList>& references);

/// Consensus tf-idf n-gram cosine score (n = 1..4) with clipped candidate
/// counts, Gaussian length penalty exp(-(lc-lr)^2 / (2*6^2)), averaged over
/// references and n, scaled by 10. IDF statistics come from this corpus's
/// references; a single-video corpus uses log-corpus-size 1 so scores do not
/// degenerate to 0.
std::vector<double> cider_d(const std::vector<CaptionSet>& corpus);

/// Distinct n-grams divided by the total word count; paragraphs shorter than
/// n tokens score 0.
double div_n(const TokenList& paragraph, std::size_t n);
inline double div2(const TokenList& paragraph) { return div_n(paragraph, 2); }

/// Repeated-4-gram mass: sum over 4-grams of max(count-1, 0) divided by the
/// total sliding 4-gram count; fewer than 4 tokens scores 0.
double re4(const TokenList& paragraph);

/// Scores every video and appends the corpus mean row. Div/RE columns are
/// computed on the candidate paragraph only.
MetricReport corpus_report(const std::vector<CaptionSet>& corpus,
                           bool smoothed_bleu = true);

/// JSON map video_id -> {candidate: string, references: [string, ...]};
/// entries are tokenized and ordered by video_id.
std::vector<CaptionSet> load_caption_file(const std::string& path);

/// Fixed column order: video_id,bleu4,rouge_l,cider_d,div2,re4. The corpus
/// mean is the final row.
void write_report_csv(std::ostream& out, const MetricReport& report);

/// JSON rendering; includes the auxiliary div1 column.
void write_report_json(std::ostream& out, const MetricReport& report);

}  // namespace seqdesc
