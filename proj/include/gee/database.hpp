#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gee/backend.hpp"
#include "gee/cache.hpp"
#include "gee/corpus.hpp"
#include "gee/embedding.hpp"
#include "gee/eval.hpp"
#include "gee/prompts.hpp"

namespace gee {

enum class DatabaseKind { Erroneous, Correct };

std::string database_kind_name(DatabaseKind kind);
DatabaseKind database_kind_from_name(const std::string& name);

/// An erroneous sample together with its teacher-generated explanation,
/// which becomes the retrieval key.
struct ExplainedSample {
  Sample sample;
  std::string explanation;
};

struct DatabaseEntry {
  std::string id;
  std::string key_text;  // explanation (erroneous) or input text (correct)
  Sample sample;
  EmbeddingVector key_vector;
};

struct DatabaseManifest {
  int schema_version = 1;
  std::string kind;
  std::string corpus_name;
  std::string language;
  std::string teacher_model;
  std::string embedder_id;
  std::string created_at;
  std::size_t entry_count = 0;
  std::string entries_sha256;
};

/// Okapi BM25 (k1 = 1.2, b = 0.75) with the +1-smoothed IDF
/// ln((N - df + 0.5) / (df + 0.5) + 1) over tokenized key texts.
class Bm25Index {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  void build(const std::vector<std::vector<std::string>>& documents);

  /// Scores of all documents with at least one query-term match, as
  /// (document ordinal, score) pairs in ordinal order.
  std::vector<std::pair<std::size_t, double>> score_all(const std::vector<std::string>& query) const;

  std::size_t document_count() const { return doc_lengths_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
  std::vector<int> doc_lengths_;
  double average_length_ = 0.0;
};

struct ScoredSample {
  Sample sample;
  std::string id;
  std::string key_text;
  double score = 0.0;
  int rank = 0;  // 1-based, consecutive, scores non-increasing
};

struct QueryResult {
  std::vector<ScoredSample> hits;
  std::vector<std::string> notes;
};

class SampleDatabase {
 public:
  SampleDatabase(DatabaseKind kind, std::vector<DatabaseEntry> entries, DatabaseManifest manifest);

  DatabaseKind kind() const { return kind_; }
  const std::vector<DatabaseEntry>& entries() const { return entries_; }
  const DatabaseManifest& manifest() const { return manifest_; }
  std::size_t size() const { return entries_.size(); }
  TokenMode token_mode() const { return token_mode_for_language(manifest_.language); }

  /// Exact top-k by cosine similarity between the embedded query and the
  /// stored key vectors; ties break by ascending entry id. Asking for more
  /// than |db| returns everything with a note.
  QueryResult knn_query(const std::string& query_text, int k, Embedder& embedder) const;

  /// Top-k by BM25 over tokenized key texts. Zero-score entries are never
  /// returned, even when fewer than k remain.
  QueryResult bm25_query(const std::string& query_text, int k) const;

  /// Seeded uniform sample without replacement; scores are 0.
  QueryResult random_select(int k, std::uint64_t seed) const;

  /// Writes manifest.json + entries.jsonl (atomic via temp-file rename,
  /// SHA-256 checksum of the entries file recorded in the manifest).
  void persist(const std::filesystem::path& dir) const;

  /// Round-trips persist output; the BM25 index is rebuilt deterministically.
  /// Version or checksum mismatches raise errors naming both sides.
  static SampleDatabase load(const std::filesystem::path& dir);

 private:
  DatabaseKind kind_;
  std::vector<DatabaseEntry> entries_;
  DatabaseManifest manifest_;
  Bm25Index bm25_;
};

struct BuildReport {
  std::size_t explained = 0;
  std::size_t failed = 0;
  std::size_t correct_count = 0;
  std::size_t erroneous_count = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> failures;  // one line per skipped sample

  nlohmann::json to_json() const;
};

struct BuildConfig {
  std::string corpus_name;
  std::string language;
  std::string teacher_model;
  bool use_edits_template = false;  // explanation prompt carries aligned edits
  unsigned jobs = 0;
  int max_output_tokens = 1024;
};

struct BuildOutput {
  SampleDatabase erroneous;
  SampleDatabase correct;
  BuildReport report;
};

/// Renders the explanation prompt for one erroneous sample and stores the
/// raw response as its explanation. Empty responses and terminal backend
/// errors surface as exceptions; build_database turns them into skip records.
ExplainedSample generate_explanation(Backend& teacher, const ResponseCache* cache,
                                     const PromptCatalog& prompts, const BuildConfig& config,
                                     const Sample& sample);

ExplainedSample generate_explanation_with_edits(Backend& teacher, const ResponseCache* cache,
                                                const PromptCatalog& prompts,
                                                const BuildConfig& config, const Sample& sample,
                                                const std::vector<EditSpan>& edits);

/// Human-readable edit lines for the edits-guided explanation prompt:
/// one `insert "..." between "..." and "..."` / `replace "..." with "..."` /
/// `delete "..."` per edit.
std::string format_edit_lines(const TokenSequence& source, const std::vector<EditSpan>& edits);

/// Splits by correctness, explains every erroneous sample, embeds the keys
/// (explanations on the erroneous side, input texts on the correct side) and
/// builds both databases. Per-sample explanation failures are recorded, not
/// fatal.
BuildOutput build_database(const std::vector<Sample>& samples, Backend& teacher,
                           const ResponseCache* cache, Embedder& embedder,
                           const PromptCatalog& prompts, const BuildConfig& config);

}  // namespace gee
