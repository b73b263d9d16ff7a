#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "gee/eval.hpp"
#include "support/oracles.hpp"

using namespace gee;

namespace {

TokenSequence ws(const std::string& text) { return tokenize(text, TokenMode::Whitespace); }

std::vector<std::string> random_tokens(std::mt19937& rng, int max_len = 12) {
  static const char* kVocab[] = {"a", "b", "c", "d"};
  std::uniform_int_distribution<int> length(0, max_len);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<std::string> tokens;
  const int n = length(rng);
  for (int i = 0; i < n; ++i) tokens.push_back(kVocab[pick(rng)]);
  return tokens;
}

int total_cost(const std::vector<EditSpan>& edits, TokenMode mode) {
  int cost = 0;
  for (const auto& edit : edits) {
    const int removed = edit.end - edit.start;
    const int added = static_cast<int>(tokenize(edit.replacement, mode).tokens.size());
    cost += std::max(removed, added);  // merged span covers max(run dels+subs, ins+subs)
  }
  return cost;
}

}  // namespace

TEST_CASE("extract_edits single substitution") {
  const auto edits = extract_edits(ws("He go to school ."), ws("He goes to school ."));
  REQUIRE(edits.size() == 1);
  CHECK(edits[0] == EditSpan{1, 2, "goes"});
}

TEST_CASE("extract_edits identity is empty") {
  CHECK(extract_edits(ws("He goes ."), ws("He goes .")).empty());
  CHECK(extract_edits(ws(""), ws("")).empty());
}

TEST_CASE("extract_edits insertion") {
  const auto edits = extract_edits(ws("a b d"), ws("a b c d"));
  REQUIRE(edits.size() == 1);
  CHECK(edits[0] == EditSpan{2, 2, "c"});
  CHECK(edits[0].is_insertion());
}

TEST_CASE("extract_edits deletion and merging") {
  const auto del = extract_edits(ws("a b c"), ws("a c"));
  REQUIRE(del.size() == 1);
  CHECK(del[0] == EditSpan{1, 2, ""});

  // A substitution adjacent to a deletion merges into one span.
  const auto merged = extract_edits(ws("a b c"), ws("x c"));
  REQUIRE(merged.size() == 1);
  CHECK(merged[0] == EditSpan{0, 2, "x"});

  // Separated edits stay separate.
  const auto split = extract_edits(ws("a b c d e"), ws("x b c d y"));
  REQUIRE(split.size() == 2);
  CHECK(split[0] == EditSpan{0, 1, "x"});
  CHECK(split[1] == EditSpan{4, 5, "y"});
}

TEST_CASE("extract_edits rejects mixed modes") {
  CHECK_THROWS_AS(extract_edits(ws("a"), tokenize("a", TokenMode::Character)),
                  std::invalid_argument);
}

TEST_CASE("extract_edits character mode joins replacements without spaces") {
  const auto source = tokenize("他去学校", TokenMode::Character);
  const auto hyp = tokenize("他去了学校", TokenMode::Character);
  const auto edits = extract_edits(source, hyp);
  REQUIRE(edits.size() == 1);
  CHECK(edits[0] == EditSpan{2, 2, "了"});
  CHECK(apply_edits(source.tokens, edits, TokenMode::Character) == hyp.tokens);
}

TEST_CASE("extract_edits cost matches the independent DP and reconstructs") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSequence source{random_tokens(rng), TokenMode::Whitespace};
    TokenSequence hypothesis{random_tokens(rng), TokenMode::Whitespace};
    const auto edits = extract_edits(source, hypothesis);
    CHECK(total_cost(edits, TokenMode::Whitespace) ==
          oracles::levenshtein_cost(source.tokens, hypothesis.tokens));
    CHECK(apply_edits(source.tokens, edits, TokenMode::Whitespace) == hypothesis.tokens);
    // Spans are sorted and non-overlapping.
    for (std::size_t i = 1; i < edits.size(); ++i) CHECK(edits[i - 1].end < edits[i].start);
    if (source.tokens == hypothesis.tokens) CHECK(edits.empty());
  }
}

TEST_CASE("f_half on the reference operating points") {
  CHECK(f_half_score(55.00, 53.04) == doctest::Approx(54.60).epsilon(0.0002));
  CHECK(f_half_score(60.52, 52.55) == doctest::Approx(58.74).epsilon(0.0002));
  CHECK(f_half_score(22.73, 22.47) == doctest::Approx(22.68).epsilon(0.0005));
  CHECK(f_half_score(55.67, 51.60) == doctest::Approx(54.81).epsilon(0.0002));
  CHECK(f_half_score(0.0, 0.0) == 0.0);
}

TEST_CASE("f_half algebra") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double p = unit(rng);
    const double r = unit(rng);
    const double f = f_half_score(p, r);
    CHECK(f >= std::min(p, r) - 1e-12);
    CHECK(f <= std::max(p, r) + 1e-12);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const double p = unit(rng);
    CHECK(f_half_score(p, p) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("match_sentence exact and missed edits") {
  GoldAnnotatedSample gold;
  gold.source_text = "He go to school";
  gold.annotations[0] = {{1, 2, "goes", "V"}};

  const auto hit = match_sentence({{1, 2, "goes"}}, gold);
  CHECK(hit.tp == 1);
  CHECK(hit.fp == 0);
  CHECK(hit.fn == 0);
  CHECK(hit.chosen_annotator == 0);

  const auto miss = match_sentence({}, gold);
  CHECK(miss.tp == 0);
  CHECK(miss.fp == 0);
  CHECK(miss.fn == 1);

  const auto wrong = match_sentence({{1, 2, "went"}}, gold);
  CHECK(wrong.tp == 0);
  CHECK(wrong.fp == 1);
  CHECK(wrong.fn == 1);
}

TEST_CASE("match_sentence chooses the best annotator") {
  GoldAnnotatedSample gold;
  gold.source_text = "a b c d";
  gold.annotations[0] = {{0, 1, "x", "T"}};
  gold.annotations[1] = {{0, 1, "x", "T"}, {2, 3, "y", "T"}};

  const auto counts = match_sentence({{0, 1, "x"}, {2, 3, "y"}}, gold);
  CHECK(counts.chosen_annotator == 1);
  CHECK(counts.tp == 2);
  CHECK(counts.fp == 0);
  CHECK(counts.fn == 0);
}

TEST_CASE("match_sentence ties prefer higher tp then lower annotator id") {
  GoldAnnotatedSample gold;
  gold.source_text = "a b c d";
  // Identical annotators: the lower id wins the tie.
  gold.annotations[3] = {{0, 1, "x", "T"}};
  gold.annotations[8] = {{0, 1, "x", "T"}};
  CHECK(match_sentence({{0, 1, "x"}}, gold).chosen_annotator == 3);
}

TEST_CASE("match_sentence normalizes replacement whitespace") {
  GoldAnnotatedSample gold;
  gold.source_text = "a b";
  gold.annotations[0] = {{0, 1, "x  y", "T"}};
  const auto counts = match_sentence({{0, 1, "x y"}}, gold);
  CHECK(counts.tp == 1);
}

TEST_CASE("best-annotator dominance holds on random instances") {
  std::mt19937 rng(29);
  std::uniform_int_distribution<int> span(0, 4);
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_int_distribution<int> word(0, 2);
  static const char* kW[] = {"x", "y", "z"};

  const auto random_edits = [&](int n_tokens) {
    std::vector<GoldAnnotation> edits;
    int cursor = 0;
    const int n = count(rng);
    for (int i = 0; i < n && cursor < n_tokens; ++i) {
      const int start = std::min(cursor + span(rng) % 2, n_tokens);
      const int end = std::min(start + span(rng) % 2 + (i % 2), n_tokens);
      edits.push_back({start, end, kW[word(rng)], "T"});
      cursor = end + 1;
      if (start == end && edits.back().replacement.empty()) edits.back().replacement = "x";
    }
    return edits;
  };

  for (int trial = 0; trial < 200; ++trial) {
    GoldAnnotatedSample gold;
    gold.source_text = "t0 t1 t2 t3 t4";
    const int annotators = 1 + (trial % 3);
    for (int a = 0; a < annotators; ++a) gold.annotations[a] = random_edits(5);

    std::vector<EditSpan> sys;
    for (const auto& edit : random_edits(5)) {
      sys.push_back({edit.start, edit.end, edit.replacement});
    }

    const auto chosen = match_sentence(sys, gold);
    const auto f_of = [](int tp, int fp, int fn) {
      const double p = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
      const double r = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
      return f_half_score(p, r);
    };
    const double chosen_f = f_of(chosen.tp, chosen.fp, chosen.fn);
    for (const auto& [annotator, edits] : gold.annotations) {
      GoldAnnotatedSample single;
      single.source_text = gold.source_text;
      single.annotations[annotator] = edits;
      const auto other = match_sentence(sys, single);
      CHECK(chosen_f >= f_of(other.tp, other.fp, other.fn) - 1e-12);
    }
  }
}

TEST_CASE("score aggregates and applies conventions") {
  SUBCASE("zero tp with system edits") {
    const auto report = score({{0, 5, 3, 0}});
    CHECK(report.precision == 0.0);
    CHECK(report.recall == 0.0);
    CHECK(report.f_half == 0.0);
  }
  SUBCASE("perfect") {
    const auto report = score({{2, 0, 0, 0}, {1, 0, 0, 0}});
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
    CHECK(report.f_half == doctest::Approx(1.0));
    CHECK(report.n_sentences == 2);
  }
  SUBCASE("do-nothing system") {
    const auto report = score({{0, 0, 2, 0}, {0, 0, 1, 0}});
    CHECK(report.precision == 1.0);  // no system edits
    CHECK(report.recall == 0.0);
  }
  SUBCASE("empty input") {
    const auto report = score({});
    CHECK(report.n_sentences == 0);
    CHECK(report.precision == 1.0);
    CHECK(report.recall == 1.0);
  }
}

TEST_CASE("evaluate_m2 on a hand-enumerable set") {
  std::istringstream m2(
      "S He go to school\n"
      "A 1 2|||V|||goes|||REQUIRED|||-NONE-|||0\n"
      "\n"
      "S She have a cats\n"
      "A 1 2|||V|||has|||REQUIRED|||-NONE-|||0\n"
      "A 3 4|||N|||cat|||REQUIRED|||-NONE-|||0\n"
      "\n"
      "S All fine here\n"
      "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n");
  const auto gold = parse_m2(m2);
  REQUIRE(gold.size() == 3);

  // System fixes sentence 1 fully, half of sentence 2, and wrongly edits 3.
  const std::vector<std::string> hypotheses = {
      "He goes to school",
      "She has a cats",
      "All fine there",
  };
  const auto result = evaluate_m2(hypotheses, gold, TokenMode::Whitespace);
  // tp: goes (1) + has (1); fn: cat; fp: there.
  CHECK(result.report.tp == 2);
  CHECK(result.report.fp == 1);
  CHECK(result.report.fn == 1);
  CHECK(result.report.precision == doctest::Approx(2.0 / 3.0));
  CHECK(result.report.recall == doctest::Approx(2.0 / 3.0));
  CHECK(result.report.f_half == doctest::Approx(2.0 / 3.0));
  REQUIRE(result.diagnostics.size() == 3);
  CHECK(result.diagnostics[0].counts.tp == 1);
  CHECK(result.diagnostics[2].counts.fp == 1);
}

TEST_CASE("evaluate_m2 count mismatch names both counts") {
  std::istringstream m2("S a b\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n");
  const auto gold = parse_m2(m2);
  CHECK_THROWS_WITH_AS(evaluate_m2({"a b", "extra"}, gold, TokenMode::Whitespace),
                       doctest::Contains("2"), std::runtime_error);
}

TEST_CASE("evaluate_m2 rejects offsets beyond the tokenization") {
  GoldAnnotatedSample gold;
  gold.source_text = "only three tokens";
  gold.annotations[0] = {{4, 5, "x", "T"}};
  CHECK_THROWS_WITH_AS(evaluate_m2({"only three tokens"}, {gold}, TokenMode::Whitespace),
                       doctest::Contains("whitespace"), std::runtime_error);
}

TEST_CASE("evaluate_parallel perfect and do-nothing systems") {
  const std::vector<std::string> sources = {"He go to school .", "All fine here ."};
  const std::vector<std::string> references = {"He goes to school .", "All fine here ."};

  const auto perfect = evaluate_parallel(sources, references, {references}, TokenMode::Whitespace);
  CHECK(perfect.report.precision == 1.0);
  CHECK(perfect.report.recall == 1.0);
  CHECK(perfect.report.f_half == doctest::Approx(1.0));

  const auto lazy = evaluate_parallel(sources, sources, {references}, TokenMode::Whitespace);
  CHECK(lazy.report.precision == 1.0);  // no system edits, zero-FP convention
  CHECK(lazy.report.recall < 1.0);
}

TEST_CASE("evaluate_parallel multiple synthetic annotators") {
  const std::vector<std::string> sources = {"a b c"};
  const std::vector<std::string> ref_a = {"a x c"};
  const std::vector<std::string> ref_b = {"a b d"};
  // The hypothesis agrees with annotator b.
  const auto result = evaluate_parallel(sources, {"a b d"}, {ref_a, ref_b}, TokenMode::Whitespace);
  CHECK(result.report.tp == 1);
  CHECK(result.report.fp == 0);
  CHECK(result.report.fn == 0);
  CHECK(result.diagnostics[0].counts.chosen_annotator == 1);
}
