#include "gee/eval.hpp"

#include <algorithm>
#include <stdexcept>

#include "gee/text.hpp"

namespace gee {

namespace {

enum class AlignOp : unsigned char { Match, Substitute, Delete, Insert };

struct Cell {
  int cost = 0;
  int matches = 0;
  AlignOp op = AlignOp::Match;
};

// True when (cost_a, -matches_a) < (cost_b, -matches_b).
bool better(int cost_a, int matches_a, int cost_b, int matches_b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  return matches_a > matches_b;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end,
                        TokenMode mode) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (mode == TokenMode::Whitespace && i > begin) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<EditSpan> extract_edits(const TokenSequence& source, const TokenSequence& hypothesis) {
  if (source.mode != hypothesis.mode) {
    throw std::invalid_argument("source and hypothesis use different tokenization modes");
  }
  const auto& src = source.tokens;
  const auto& hyp = hypothesis.tokens;
  const std::size_t n = src.size();
  const std::size_t m = hyp.size();

  std::vector<Cell> dp((n + 1) * (m + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (m + 1) + j]; };

  for (std::size_t i = 1; i <= n; ++i) at(i, 0) = {static_cast<int>(i), 0, AlignOp::Delete};
  for (std::size_t j = 1; j <= m; ++j) at(0, j) = {static_cast<int>(j), 0, AlignOp::Insert};

  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool equal = src[i - 1] == hyp[j - 1];
      const Cell& diag = at(i - 1, j - 1);
      Cell best{diag.cost + (equal ? 0 : 1), diag.matches + (equal ? 1 : 0),
                equal ? AlignOp::Match : AlignOp::Substitute};

      const Cell& up = at(i - 1, j);
      if (better(up.cost + 1, up.matches, best.cost, best.matches)) {
        best = {up.cost + 1, up.matches, AlignOp::Delete};
      }
      const Cell& left = at(i, j - 1);
      if (better(left.cost + 1, left.matches, best.cost, best.matches)) {
        best = {left.cost + 1, left.matches, AlignOp::Insert};
      }
      at(i, j) = best;
    }
  }

  std::vector<AlignOp> ops;
  ops.reserve(n + m);
  for (std::size_t i = n, j = m; i > 0 || j > 0;) {
    const AlignOp op = at(i, j).op;
    ops.push_back(op);
    switch (op) {
      case AlignOp::Match:
      case AlignOp::Substitute:
        --i;
        --j;
        break;
      case AlignOp::Delete:
        --i;
        break;
      case AlignOp::Insert:
        --j;
        break;
    }
  }
  std::reverse(ops.begin(), ops.end());

  // Merge every contiguous run of non-match operations into one span.
  std::vector<EditSpan> edits;
  std::size_t i = 0, j = 0;
  bool in_run = false;
  std::size_t run_src_start = 0, run_hyp_start = 0;
  const auto close_run = [&](std::size_t src_end, std::size_t hyp_end) {
    EditSpan span;
    span.start = static_cast<int>(run_src_start);
    span.end = static_cast<int>(src_end);
    span.replacement = join_tokens(hyp, run_hyp_start, hyp_end, hypothesis.mode);
    edits.push_back(std::move(span));
    in_run = false;
  };
  for (const AlignOp op : ops) {
    if (op == AlignOp::Match) {
      if (in_run) close_run(i, j);
      ++i;
      ++j;
      continue;
    }
    if (!in_run) {
      in_run = true;
      run_src_start = i;
      run_hyp_start = j;
    }
    switch (op) {
      case AlignOp::Substitute:
        ++i;
        ++j;
        break;
      case AlignOp::Delete:
        ++i;
        break;
      case AlignOp::Insert:
        ++j;
        break;
      case AlignOp::Match:
        break;
    }
  }
  if (in_run) close_run(i, j);
  return edits;
}

std::vector<std::string> apply_edits(const std::vector<std::string>& source_tokens,
                                     const std::vector<EditSpan>& edits, TokenMode mode) {
  std::vector<std::string> out;
  std::size_t cursor = 0;
  for (const auto& edit : edits) {
    if (edit.start < static_cast<int>(cursor) || edit.end < edit.start ||
        edit.end > static_cast<int>(source_tokens.size())) {
      throw std::invalid_argument("edit span out of order or out of range");
    }
    for (std::size_t i = cursor; i < static_cast<std::size_t>(edit.start); ++i) {
      out.push_back(source_tokens[i]);
    }
    if (!edit.replacement.empty()) {
      for (auto& token : tokenize(edit.replacement, mode).tokens) {
        out.push_back(std::move(token));
      }
    }
    cursor = static_cast<std::size_t>(edit.end);
  }
  for (std::size_t i = cursor; i < source_tokens.size(); ++i) out.push_back(source_tokens[i]);
  return out;
}

namespace {

struct NormalizedEdit {
  int start;
  int end;
  std::string replacement;

  friend bool operator==(const NormalizedEdit&, const NormalizedEdit&) = default;
};

NormalizedEdit normalized(int start, int end, const std::string& replacement) {
  return {start, end, normalize_text(replacement)};
}

int count_matches(const std::vector<NormalizedEdit>& sys, const std::vector<NormalizedEdit>& gold) {
  std::vector<bool> used(sys.size(), false);
  int matches = 0;
  for (const auto& g : gold) {
    for (std::size_t k = 0; k < sys.size(); ++k) {
      if (!used[k] && sys[k] == g) {
        used[k] = true;
        ++matches;
        break;
      }
    }
  }
  return matches;
}

}  // namespace

double f_half_score(double precision, double recall) {
  const double denominator = 0.25 * precision + recall;
  if (denominator == 0.0) return 0.0;
  return 1.25 * precision * recall / denominator;
}

SentenceCounts match_sentence(const std::vector<EditSpan>& sys_edits,
                              const GoldAnnotatedSample& gold) {
  std::vector<NormalizedEdit> sys;
  sys.reserve(sys_edits.size());
  for (const auto& e : sys_edits) sys.push_back(normalized(e.start, e.end, e.replacement));

  if (gold.annotations.empty()) {
    return {0, static_cast<int>(sys.size()), 0, -1};
  }

  SentenceCounts best;
  double best_f = -1.0;
  for (const auto& [annotator, edits] : gold.annotations) {
    std::vector<NormalizedEdit> gold_edits;
    gold_edits.reserve(edits.size());
    for (const auto& e : edits) gold_edits.push_back(normalized(e.start, e.end, e.replacement));

    SentenceCounts counts;
    counts.chosen_annotator = annotator;
    counts.tp = count_matches(sys, gold_edits);
    counts.fp = static_cast<int>(sys.size()) - counts.tp;
    counts.fn = static_cast<int>(gold_edits.size()) - counts.tp;

    const double p = counts.tp + counts.fp == 0 ? 1.0 : static_cast<double>(counts.tp) / (counts.tp + counts.fp);
    const double r = counts.tp + counts.fn == 0 ? 1.0 : static_cast<double>(counts.tp) / (counts.tp + counts.fn);
    const double f = f_half_score(p, r);
    // Annotators iterate in ascending id order, so strict comparisons keep
    // the lower id on ties.
    if (f > best_f || (f == best_f && counts.tp > best.tp)) {
      best_f = f;
      best = counts;
    }
  }
  return best;
}

ScoreReport score(const std::vector<SentenceCounts>& per_sentence) {
  ScoreReport report;
  report.n_sentences = static_cast<int>(per_sentence.size());
  for (const auto& counts : per_sentence) {
    report.tp += counts.tp;
    report.fp += counts.fp;
    report.fn += counts.fn;
  }
  report.precision =
      report.tp + report.fp == 0 ? 1.0 : static_cast<double>(report.tp) / (report.tp + report.fp);
  report.recall =
      report.tp + report.fn == 0 ? 1.0 : static_cast<double>(report.tp) / (report.tp + report.fn);
  report.f_half = f_half_score(report.precision, report.recall);
  return report;
}

EvaluateResult evaluate_m2(const std::vector<std::string>& hypotheses,
                           const std::vector<GoldAnnotatedSample>& gold, TokenMode mode) {
  if (hypotheses.size() != gold.size()) {
    throw std::runtime_error("prediction count " + std::to_string(hypotheses.size()) +
                             " does not match gold sentence count " + std::to_string(gold.size()));
  }
  EvaluateResult result;
  std::vector<SentenceCounts> per_sentence;
  per_sentence.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto source = tokenize(gold[i].source_text, mode);
    for (const auto& [annotator, edits] : gold[i].annotations) {
      for (const auto& edit : edits) {
        if (edit.end > static_cast<int>(source.tokens.size())) {
          throw std::runtime_error("gold edit span exceeds token count under " +
                                   token_mode_name(mode) + " tokenization at sentence " +
                                   std::to_string(i + 1));
        }
      }
    }
    const auto sys_edits = extract_edits(source, tokenize(hypotheses[i], mode));
    const auto counts = match_sentence(sys_edits, gold[i]);

    SentenceDiagnostic diag;
    diag.counts = counts;
    diag.sys_edits = sys_edits;
    if (const auto it = gold[i].annotations.find(counts.chosen_annotator);
        it != gold[i].annotations.end()) {
      diag.gold_edits = it->second;
    }
    per_sentence.push_back(counts);
    result.diagnostics.push_back(std::move(diag));
  }
  result.report = score(per_sentence);
  return result;
}

std::vector<GoldAnnotatedSample> gold_from_references(
    const std::vector<std::string>& sources,
    const std::vector<std::vector<std::string>>& reference_sets, TokenMode mode) {
  if (reference_sets.empty()) throw std::runtime_error("no reference sets given");
  for (const auto& refs : reference_sets) {
    if (refs.size() != sources.size()) {
      throw std::runtime_error("reference count " + std::to_string(refs.size()) +
                               " does not match source count " + std::to_string(sources.size()));
    }
  }
  std::vector<GoldAnnotatedSample> gold(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    gold[i].source_text = sources[i];
    const auto source = tokenize(sources[i], mode);
    for (std::size_t a = 0; a < reference_sets.size(); ++a) {
      auto& edits = gold[i].annotations[static_cast<int>(a)];
      for (const auto& span : extract_edits(source, tokenize(reference_sets[a][i], mode))) {
        edits.push_back({span.start, span.end, span.replacement, "UNK"});
      }
    }
  }
  return gold;
}

EvaluateResult evaluate_parallel(const std::vector<std::string>& sources,
                                 const std::vector<std::string>& hypotheses,
                                 const std::vector<std::vector<std::string>>& reference_sets,
                                 TokenMode mode) {
  if (sources.size() != hypotheses.size()) {
    throw std::runtime_error("prediction count " + std::to_string(hypotheses.size()) +
                             " does not match source count " + std::to_string(sources.size()));
  }
  return evaluate_m2(hypotheses, gold_from_references(sources, reference_sets, mode), mode);
}

}  // namespace gee
