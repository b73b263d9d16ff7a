#include "gee/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gee/text.hpp"

namespace gee {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::string& what, std::size_t line_no) {
  throw std::runtime_error(what + " at line " + std::to_string(line_no));
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

TokenMode token_mode_for_language(std::string_view language) {
  const auto base = language.substr(0, language.find_first_of("-_"));
  if (base == "zh" || base == "ja" || base == "ko") return TokenMode::Character;
  return TokenMode::Whitespace;
}

std::string token_mode_name(TokenMode mode) {
  return mode == TokenMode::Whitespace ? "whitespace" : "character";
}

TokenMode token_mode_from_name(std::string_view name) {
  if (name == "whitespace") return TokenMode::Whitespace;
  if (name == "character") return TokenMode::Character;
  throw std::invalid_argument("unknown tokenization mode: " + std::string(name));
}

std::string TokenSequence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mode == TokenMode::Whitespace && i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TokenSequence tokenize(const std::string& text, TokenMode mode) {
  TokenSequence seq;
  seq.mode = mode;
  const auto cps = decode_utf8(text);
  if (mode == TokenMode::Whitespace) {
    std::string current;
    for (char32_t cp : cps) {
      if (is_unicode_space(cp)) {
        if (!current.empty()) seq.tokens.push_back(std::move(current));
        current.clear();
      } else {
        current += encode_utf8(cp);
      }
    }
    if (!current.empty()) seq.tokens.push_back(std::move(current));
  } else {
    for (char32_t cp : cps) {
      if (!is_unicode_space(cp)) seq.tokens.push_back(encode_utf8(cp));
    }
  }
  return seq;
}

std::vector<Sample> parse_parallel(std::istream& in, ParallelFormat format,
                                   const std::string& corpus_name,
                                   const std::string& language) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (!is_valid_utf8(line)) line_error("invalid UTF-8 encoding", line_no);

    Sample sample;
    sample.language = language;
    sample.id = corpus_name + ":" + std::to_string(line_no);

    if (format == ParallelFormat::Tsv) {
      const auto first_tab = line.find('\t');
      if (first_tab == std::string::npos) line_error("expected 2 tab-separated fields, got 1", line_no);
      if (line.find('\t', first_tab + 1) != std::string::npos) {
        line_error("expected 2 tab-separated fields, got more", line_no);
      }
      sample.input_text = line.substr(0, first_tab);
      sample.corrected_text = line.substr(first_tab + 1);
    } else {
      json record = json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.is_object()) line_error("malformed JSON record", line_no);
      if (!record.contains("text") || !record.contains("label")) {
        line_error("JSON record missing \"text\" or \"label\"", line_no);
      }
      sample.input_text = record["text"].get<std::string>();
      sample.corrected_text = record["label"].get<std::string>();
      if (record.contains("id")) sample.id = record["id"].get<std::string>();
    }

    if (trim(sample.input_text).empty() || trim(sample.corrected_text).empty()) {
      line_error("empty input or corrected text", line_no);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

namespace {

constexpr char kM2None[] = "-NONE-";

std::vector<std::string> split_m2_fields(std::string_view text) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const auto sep = text.find("|||", pos);
    if (sep == std::string_view::npos) {
      fields.emplace_back(text.substr(pos));
      return fields;
    }
    fields.emplace_back(text.substr(pos, sep - pos));
    pos = sep + 3;
  }
}

int parse_int_field(const std::string& field, std::size_t line_no, const char* what) {
  try {
    std::size_t consumed = 0;
    const int value = std::stoi(field, &consumed);
    if (consumed != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    line_error(std::string("non-integer ") + what + " '" + field + "'", line_no);
  }
}

}  // namespace

std::vector<GoldAnnotatedSample> parse_m2(std::istream& in) {
  std::vector<GoldAnnotatedSample> samples;
  bool in_block = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      in_block = false;
      continue;
    }
    if (line.rfind("S ", 0) == 0 || line == "S") {
      samples.emplace_back();
      samples.back().source_text = line.size() > 2 ? line.substr(2) : "";
      in_block = true;
      continue;
    }
    if (line.rfind("A ", 0) == 0) {
      if (!in_block) line_error("annotation line before any sentence line", line_no);
      auto& sample = samples.back();

      const std::string payload = line.substr(2);
      const auto fields = split_m2_fields(payload);
      if (fields.size() < 3) line_error("annotation line with too few fields", line_no);

      const auto& span = fields.front();
      const auto space = span.find(' ');
      if (space == std::string::npos) line_error("annotation span missing end offset", line_no);
      const int start = parse_int_field(span.substr(0, space), line_no, "start offset");
      const int end = parse_int_field(trim(span.substr(space + 1)), line_no, "end offset");
      const int annotator = parse_int_field(fields.back(), line_no, "annotator id");

      auto& edits = sample.annotations[annotator];  // creates the annotator either way
      const std::string& type_label = fields[1];
      if (type_label == "noop" || (start == -1 && end == -1)) continue;

      if (start < 0 || end < start) line_error("invalid annotation span", line_no);
      const auto n_tokens = tokenize(sample.source_text, TokenMode::Whitespace).tokens.size();
      if (static_cast<std::size_t>(end) > n_tokens) {
        line_error("annotation span exceeds sentence length", line_no);
      }

      GoldAnnotation edit;
      edit.start = start;
      edit.end = end;
      edit.type_label = type_label;
      edit.replacement = fields[2] == kM2None ? std::string() : fields[2];
      edits.push_back(std::move(edit));
      continue;
    }
    line_error("unrecognized M2 line", line_no);
  }
  return samples;
}

std::string serialize_m2(const std::vector<GoldAnnotatedSample>& samples) {
  std::ostringstream out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    if (i > 0) out << '\n';
    out << "S " << sample.source_text << '\n';
    for (const auto& [annotator, edits] : sample.annotations) {
      if (edits.empty()) {
        out << "A -1 -1|||noop|||" << kM2None << "|||REQUIRED|||" << kM2None << "|||"
            << annotator << '\n';
        continue;
      }
      for (const auto& edit : edits) {
        out << "A " << edit.start << ' ' << edit.end << "|||" << edit.type_label << "|||"
            << (edit.replacement.empty() ? kM2None : edit.replacement.c_str())
            << "|||REQUIRED|||" << kM2None << "|||" << annotator << '\n';
      }
    }
  }
  return out.str();
}

std::vector<Sample> filter_samples(const std::vector<Sample>& samples, const FilterConfig& config) {
  if (config.min_tokens > config.max_tokens) {
    throw std::invalid_argument("min_tokens exceeds max_tokens");
  }
  std::vector<Sample> kept;
  kept.reserve(samples.size());
  for (const auto& sample : samples) {
    const auto mode = token_mode_for_language(sample.language);
    const auto count = static_cast<int>(tokenize(sample.input_text, mode).tokens.size());
    if (count >= config.min_tokens && count <= config.max_tokens) kept.push_back(sample);
  }
  if (kept.size() <= config.cap) return kept;

  std::vector<std::size_t> indices(kept.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(config.cap);
  std::sort(indices.begin(), indices.end());

  std::vector<Sample> subsampled;
  subsampled.reserve(config.cap);
  for (std::size_t idx : indices) subsampled.push_back(std::move(kept[idx]));
  return subsampled;
}

SplitResult split_by_correctness(const std::vector<Sample>& samples) {
  SplitResult result;
  for (const auto& sample : samples) {
    if (normalize_text(sample.input_text) != normalize_text(sample.corrected_text)) {
      result.erroneous.push_back(sample);
    } else {
      result.correct.push_back(sample);
    }
  }
  return result;
}

}  // namespace gee
