#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gee/backend.hpp"
#include "gee/cache.hpp"
#include "gee/database.hpp"
#include "gee/embedding.hpp"
#include "gee/eval.hpp"
#include "gee/prompts.hpp"

namespace gee {

enum class Strategy { Explanation, Semantic, Bm25, Random };

std::string strategy_name(Strategy strategy);
Strategy strategy_from_name(const std::string& name);

enum class ExplanationMode { None, Pre, Post };

std::string explanation_mode_name(ExplanationMode mode);
ExplanationMode explanation_mode_from_name(const std::string& name);

struct RunConfig {
  int k_erroneous = 4;
  int k_correct = 4;
  Strategy strategy = Strategy::Explanation;
  std::uint64_t seed = 0;
  ExplanationMode explanation_mode = ExplanationMode::None;
  std::string predictor_model;
  std::string detection_template = kDetectionDetailedTemplate;
  bool bm25_detection_query = false;  // explanation strategy matches d^T by BM25 instead of kNN
  unsigned jobs = 0;
  int detection_max_tokens = 1024;
  int correction_max_tokens = 512;
  std::string lineage_id;  // derived from the config when empty

  nlohmann::json to_json() const;
};

/// Grammar-check output for one test input; the raw text is kept verbatim
/// and serves only as the erroneous-side retrieval query.
struct DetectionResult {
  std::string source;
  std::string initial_explanation;
};

struct DemoProvenance {
  std::string id;
  DatabaseKind role = DatabaseKind::Erroneous;
  std::string strategy;
  double score = 0.0;
  int rank = 0;
  std::string key_text;
};

struct DemonstrationSet {
  std::vector<Sample> erroneous;
  std::vector<Sample> correct;
  std::vector<DemoProvenance> provenance;  // erroneous demos first, then correct
  std::string erroneous_query;
  std::string correct_query;
  std::vector<std::string> notes;
};

struct Prediction {
  std::size_t index = 0;
  std::string source;
  std::string hypothesis;  // never empty; falls back to the source
  std::string raw_response;
  DemonstrationSet demos;
  std::optional<DetectionResult> detection;
  std::vector<std::string> flags;
};

struct RunManifest {
  std::string lineage_id;
  nlohmann::json config;
  nlohmann::json erroneous_db;
  nlohmann::json correct_db;
  std::string predictor_backend_id;
  std::string predictor_model;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  double cache_hit_rate = 0.0;
  std::size_t items = 0;
  std::size_t failed_items = 0;
  std::vector<std::string> errors;  // "<index>: <message>"
  double wall_seconds = 0.0;
  std::string created_at;

  nlohmann::json to_json() const;
};

struct RunOutput {
  std::vector<Prediction> predictions;  // order-aligned with the test set
  RunManifest manifest;
};

/// Renders the configured detection template over the source and returns the
/// raw predictor output as the initial explanation.
DetectionResult detect(Backend& predictor, const ResponseCache* cache, const PromptCatalog& prompts,
                       const RunConfig& config, const std::string& source);

/// Dual retrieval. The erroneous side is queried with the detection output
/// under strategy=explanation (kNN, or BM25 behind the config flag), with
/// the source under semantic/bm25, or drawn at random; the correct side is
/// always queried with the source through the same mechanism family. Demos
/// whose input text equals the source are skipped and replaced by the next
/// rank. An empty detection output degrades that item to semantic retrieval.
DemonstrationSet retrieve_demonstrations(const SampleDatabase& err_db,
                                         const SampleDatabase& corr_db, const std::string& source,
                                         const std::optional<DetectionResult>& detection,
                                         const RunConfig& config, Embedder& embedder);

/// Instruction block plus one stanza per demo (all erroneous demos, then all
/// correct demos), then the open test stanza. explanation_mode=pre inserts
/// the explanation between input and output (the test stanza carries
/// `test_explanation` when given); post appends it after the output. Correct
/// demos always use the literal explanation "No error in text".
std::string assemble_prompt(const PromptCatalog& prompts, const DemonstrationSet& demos,
                            const std::string& source, const RunConfig& config,
                            const std::optional<std::string>& test_explanation = std::nullopt);

struct ParsedHypothesis {
  std::string hypothesis;
  std::vector<std::string> flags;
};

/// Text before the first `</corrected sentence>`, with a re-emitted opening
/// tag stripped and whitespace trimmed; falls back to the first non-empty
/// line, then to the source (copy-through).
ParsedHypothesis parse_hypothesis(const std::string& raw, const std::string& source);

RunOutput run_batch(const std::vector<std::string>& test_set, const SampleDatabase& err_db,
                    const SampleDatabase& corr_db, const RunConfig& config, Backend& predictor,
                    const ResponseCache* cache, Embedder& embedder, const PromptCatalog& prompts);

std::string predictions_to_jsonl(const RunOutput& output);

struct SweepRow {
  int k_correct = 0;
  int k_erroneous = 0;
  ScoreReport report;
  RunOutput run;
};

/// Runs k_C = 0..total with k_E = total - k_C and scores each row against
/// the gold annotations. All rows share one lineage id.
std::vector<SweepRow> sweep_kc(const std::vector<std::string>& test_set,
                               const SampleDatabase& err_db, const SampleDatabase& corr_db,
                               const RunConfig& config, Backend& predictor,
                               const ResponseCache* cache, Embedder& embedder,
                               const PromptCatalog& prompts,
                               const std::vector<GoldAnnotatedSample>& gold, TokenMode mode,
                               int total = 8);

/// TSV table of a sweep: header `k_C\tP\tR\tF0.5`, percentages at 2 decimals.
std::string sweep_to_tsv(const std::vector<SweepRow>& rows);

}  // namespace gee
