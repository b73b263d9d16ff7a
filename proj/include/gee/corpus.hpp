#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gee {

/// One labeled pair: possibly erroneous input text and its corrected form.
struct Sample {
  std::string id;
  std::string input_text;
  std::string corrected_text;
  std::string language;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class TokenMode { Whitespace, Character };

/// CJK languages default to character tokens, everything else to whitespace.
TokenMode token_mode_for_language(std::string_view language);
std::string token_mode_name(TokenMode mode);
TokenMode token_mode_from_name(std::string_view name);

struct TokenSequence {
  std::vector<std::string> tokens;
  TokenMode mode = TokenMode::Whitespace;

  /// Joins tokens back into a string under the mode's rules
  /// (single spaces for whitespace mode, direct concatenation otherwise).
  std::string joined() const;
};

/// Deterministic tokenizer; never produces empty tokens.
TokenSequence tokenize(const std::string& text, TokenMode mode);

enum class ParallelFormat { Tsv, Jsonl };

/// Reads a parallel corpus. TSV lines are `<input>\t<corrected>`; JSONL
/// records carry "text", "label" and an optional "id". Generated ids are
/// `<corpus_name>:<line>` (1-based). Throws std::runtime_error naming the
/// offending line on malformed records.
std::vector<Sample> parse_parallel(std::istream& in, ParallelFormat format,
                                   const std::string& corpus_name,
                                   const std::string& language);

/// One token-offset edit from a gold annotation file. start == end denotes
/// an insertion before token `start`; an empty replacement is a deletion.
struct GoldAnnotation {
  int start = 0;
  int end = 0;
  std::string replacement;
  std::string type_label;  // carried verbatim, never interpreted

  friend bool operator==(const GoldAnnotation&, const GoldAnnotation&) = default;
};

struct GoldAnnotatedSample {
  std::string source_text;
  std::map<int, std::vector<GoldAnnotation>> annotations;  // annotator id -> edits

  friend bool operator==(const GoldAnnotatedSample&, const GoldAnnotatedSample&) = default;
};

/// Parses M2 blocks: an "S <tokens>" line followed by "A ..." edit lines,
/// blocks separated by blank lines. "noop" edits and -1 offsets become an
/// annotator with an empty edit list.
std::vector<GoldAnnotatedSample> parse_m2(std::istream& in);

std::string serialize_m2(const std::vector<GoldAnnotatedSample>& samples);

struct FilterConfig {
  int min_tokens = 10;
  int max_tokens = 60;
  std::size_t cap = 25000;
  std::uint64_t seed = 0;
};

/// Keeps samples whose input token count lies in [min_tokens, max_tokens]
/// (tokenized per the sample's language mode), then subsamples uniformly to
/// `cap` with the given seed. Relative order of kept samples is preserved.
std::vector<Sample> filter_samples(const std::vector<Sample>& samples, const FilterConfig& config);

struct SplitResult {
  std::vector<Sample> erroneous;  // normalized input != normalized correction
  std::vector<Sample> correct;
};

SplitResult split_by_correctness(const std::vector<Sample>& samples);

}  // namespace gee
