#pragma once

#include <string>
#include <vector>

#include "gee/corpus.hpp"

namespace gee {

/// One source-side token span and its replacement. start == end with a
/// non-empty replacement is an insertion before token `start`; an empty
/// replacement is a deletion. Spans within one sentence are sorted and
/// non-overlapping.
struct EditSpan {
  int start = 0;
  int end = 0;
  std::string replacement;  // replacement tokens joined under the token mode

  bool is_insertion() const { return start == end; }

  friend bool operator==(const EditSpan&, const EditSpan&) = default;
};

/// Minimal-cost token alignment (substitution/insertion/deletion cost 1,
/// match 0; ties resolved toward more matches, then a fixed deterministic
/// backtrace). Contiguous non-match runs merge into single spans.
std::vector<EditSpan> extract_edits(const TokenSequence& source, const TokenSequence& hypothesis);

/// Splices the edits into the source tokens; inverse of extract_edits.
std::vector<std::string> apply_edits(const std::vector<std::string>& source_tokens,
                                     const std::vector<EditSpan>& edits, TokenMode mode);

struct SentenceCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int chosen_annotator = -1;
};

/// Matches system edits against each annotator's gold edits (span +
/// normalized replacement equality) and keeps the annotator maximizing
/// sentence F0.5; ties prefer higher tp, then the lower annotator id.
SentenceCounts match_sentence(const std::vector<EditSpan>& sys_edits,
                              const GoldAnnotatedSample& gold);

struct ScoreReport {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double precision = 1.0;  // 1.0 when tp+fp == 0
  double recall = 1.0;     // 1.0 when tp+fn == 0
  double f_half = 0.0;
  int n_sentences = 0;
};

/// F_{0.5} = 1.25 * P * R / (0.25 * P + R); 0 when the denominator is 0.
/// Unit-agnostic: works on ratios or percentages alike.
double f_half_score(double precision, double recall);

ScoreReport score(const std::vector<SentenceCounts>& per_sentence);

struct SentenceDiagnostic {
  SentenceCounts counts;
  std::vector<EditSpan> sys_edits;
  std::vector<GoldAnnotation> gold_edits;  // the chosen annotator's edits
};

struct EvaluateResult {
  ScoreReport report;
  std::vector<SentenceDiagnostic> diagnostics;
};

/// Scores hypotheses against M2 gold annotations (order-aligned). The gold
/// source lines define the source tokens; offsets are validated against the
/// chosen tokenization mode.
EvaluateResult evaluate_m2(const std::vector<std::string>& hypotheses,
                           const std::vector<GoldAnnotatedSample>& gold, TokenMode mode);

/// Derives gold annotations from parallel references: each reference set
/// becomes one synthetic annotator whose edits come from
/// extract_edits(source, reference).
std::vector<GoldAnnotatedSample> gold_from_references(
    const std::vector<std::string>& sources,
    const std::vector<std::vector<std::string>>& reference_sets, TokenMode mode);

/// Scores hypotheses against parallel references via gold_from_references.
EvaluateResult evaluate_parallel(const std::vector<std::string>& sources,
                                 const std::vector<std::string>& hypotheses,
                                 const std::vector<std::vector<std::string>>& reference_sets,
                                 TokenMode mode);

}  // namespace gee
