#include "gee/database.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "gee/provenance.hpp"
#include "gee/sha256.hpp"
#include "gee/text.hpp"
#include "gee/worker_pool.hpp"

namespace gee {

using nlohmann::json;

std::string database_kind_name(DatabaseKind kind) {
  return kind == DatabaseKind::Erroneous ? "erroneous" : "correct";
}

DatabaseKind database_kind_from_name(const std::string& name) {
  if (name == "erroneous") return DatabaseKind::Erroneous;
  if (name == "correct") return DatabaseKind::Correct;
  throw std::invalid_argument("unknown database kind: " + name);
}

// --- BM25 --------------------------------------------------------------------

void Bm25Index::build(const std::vector<std::vector<std::string>>& documents) {
  postings_.clear();
  doc_lengths_.clear();
  doc_lengths_.reserve(documents.size());
  long long total_length = 0;
  for (std::size_t doc = 0; doc < documents.size(); ++doc) {
    const auto& terms = documents[doc];
    doc_lengths_.push_back(static_cast<int>(terms.size()));
    total_length += static_cast<long long>(terms.size());
    std::unordered_map<std::string, int> tf;
    for (const auto& term : terms) ++tf[term];
    for (const auto& [term, count] : tf) postings_[term].emplace_back(doc, count);
  }
  average_length_ =
      documents.empty() ? 0.0 : static_cast<double>(total_length) / static_cast<double>(documents.size());
}

std::vector<std::pair<std::size_t, double>> Bm25Index::score_all(
    const std::vector<std::string>& query) const {
  const auto n_docs = static_cast<double>(doc_lengths_.size());
  std::unordered_map<std::size_t, double> scores;
  for (const auto& term : query) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
    for (const auto& [doc, tf] : it->second) {
      const double length_norm =
          kK1 * (1.0 - kB + kB * doc_lengths_[doc] / (average_length_ > 0 ? average_length_ : 1.0));
      scores[doc] += idf * (tf * (kK1 + 1.0)) / (tf + length_norm);
    }
  }
  std::vector<std::pair<std::size_t, double>> out(scores.begin(), scores.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

// --- SampleDatabase ----------------------------------------------------------

SampleDatabase::SampleDatabase(DatabaseKind kind, std::vector<DatabaseEntry> entries,
                               DatabaseManifest manifest)
    : kind_(kind), entries_(std::move(entries)), manifest_(std::move(manifest)) {
  manifest_.kind = database_kind_name(kind_);
  manifest_.entry_count = entries_.size();
  if (!entries_.empty()) {
    const auto dim = entries_.front().key_vector.dimension();
    std::set<std::string> ids;
    for (const auto& entry : entries_) {
      if (entry.key_vector.dimension() != dim) {
        throw std::invalid_argument("database entries mix embedding dimensions");
      }
      if (!ids.insert(entry.id).second) {
        throw std::invalid_argument("duplicate entry id: " + entry.id);
      }
    }
  }
  std::vector<std::vector<std::string>> documents;
  documents.reserve(entries_.size());
  const auto mode = token_mode();
  for (const auto& entry : entries_) documents.push_back(tokenize(entry.key_text, mode).tokens);
  bm25_.build(documents);
}

namespace {

ScoredSample to_scored(const DatabaseEntry& entry, double score, int rank) {
  return {entry.sample, entry.id, entry.key_text, score, rank};
}

// Sorts candidate (entry index, score) pairs by descending score, ties by
// ascending entry id, and keeps the top k.
std::vector<ScoredSample> take_top_k(const std::vector<DatabaseEntry>& entries,
                                     std::vector<std::pair<std::size_t, double>> scored, int k) {
  std::sort(scored.begin(), scored.end(), [&entries](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return entries[a.first].id < entries[b.first].id;
  });
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, k)), scored.size());
  std::vector<ScoredSample> hits;
  hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    hits.push_back(to_scored(entries[scored[i].first], scored[i].second, static_cast<int>(i) + 1));
  }
  return hits;
}

}  // namespace

QueryResult SampleDatabase::knn_query(const std::string& query_text, int k,
                                      Embedder& embedder) const {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  QueryResult result;
  if (!manifest_.embedder_id.empty() && embedder.id() != manifest_.embedder_id) {
    result.notes.push_back("embedder mismatch: database built with " + manifest_.embedder_id +
                           ", queried with " + embedder.id());
  }
  if (k == 0 || entries_.empty()) {
    if (k > 0) result.notes.push_back("database is empty");
    return result;
  }
  const auto query_vector = embedder.embed(query_text);
  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    scored.emplace_back(i, dot(query_vector, entries_[i].key_vector));
  }
  if (static_cast<std::size_t>(k) > entries_.size()) {
    result.notes.push_back("requested " + std::to_string(k) + " neighbors from " +
                           std::to_string(entries_.size()) + " entries; returning all");
  }
  result.hits = take_top_k(entries_, std::move(scored), k);
  return result;
}

QueryResult SampleDatabase::bm25_query(const std::string& query_text, int k) const {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  QueryResult result;
  if (k == 0 || entries_.empty()) return result;
  const auto query_terms = tokenize(query_text, token_mode()).tokens;
  if (query_terms.empty()) return result;
  auto scored = bm25_.score_all(query_terms);  // positive scores only
  if (static_cast<std::size_t>(k) > scored.size()) {
    result.notes.push_back("only " + std::to_string(scored.size()) +
                           " entries share terms with the query");
  }
  result.hits = take_top_k(entries_, std::move(scored), k);
  return result;
}

QueryResult SampleDatabase::random_select(int k, std::uint64_t seed) const {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  QueryResult result;
  if (k == 0 || entries_.empty()) return result;
  std::vector<std::size_t> indices(entries_.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), indices.size());
  if (static_cast<std::size_t>(k) > indices.size()) {
    result.notes.push_back("requested " + std::to_string(k) + " of " +
                           std::to_string(indices.size()) + " entries; returning all");
  }
  result.hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    result.hits.push_back(to_scored(entries_[indices[i]], 0.0, static_cast<int>(i) + 1));
  }
  return result;
}

// --- persistence -------------------------------------------------------------

namespace {

constexpr int kSchemaVersion = 1;

json manifest_to_json(const DatabaseManifest& manifest) {
  return json{{"schema_version", manifest.schema_version},
              {"kind", manifest.kind},
              {"corpus_name", manifest.corpus_name},
              {"language", manifest.language},
              {"teacher_model", manifest.teacher_model},
              {"embedder_id", manifest.embedder_id},
              {"created_at", manifest.created_at},
              {"entry_count", manifest.entry_count},
              {"entries_sha256", manifest.entries_sha256}};
}

DatabaseManifest manifest_from_json(const json& j) {
  DatabaseManifest manifest;
  manifest.schema_version = j.at("schema_version").get<int>();
  manifest.kind = j.at("kind").get<std::string>();
  manifest.corpus_name = j.at("corpus_name").get<std::string>();
  manifest.language = j.at("language").get<std::string>();
  manifest.teacher_model = j.at("teacher_model").get<std::string>();
  manifest.embedder_id = j.at("embedder_id").get<std::string>();
  manifest.created_at = j.at("created_at").get<std::string>();
  manifest.entry_count = j.at("entry_count").get<std::size_t>();
  manifest.entries_sha256 = j.at("entries_sha256").get<std::string>();
  return manifest;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void SampleDatabase::persist(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);

  std::ostringstream entries_stream;
  for (const auto& entry : entries_) {
    json line = {{"id", entry.id},
                 {"key_text", entry.key_text},
                 {"input_text", entry.sample.input_text},
                 {"corrected_text", entry.sample.corrected_text},
                 {"vector", entry.key_vector.values}};
    entries_stream << line.dump() << '\n';
  }
  const std::string entries_blob = entries_stream.str();

  DatabaseManifest manifest = manifest_;
  manifest.schema_version = kSchemaVersion;
  manifest.entry_count = entries_.size();
  manifest.entries_sha256 = sha256_hex(entries_blob);

  write_atomically(dir / "entries.jsonl", entries_blob);
  write_atomically(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

SampleDatabase SampleDatabase::load(const std::filesystem::path& dir) {
  std::ifstream manifest_in(dir / "manifest.json");
  if (!manifest_in) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
  json manifest_json;
  manifest_in >> manifest_json;
  auto manifest = manifest_from_json(manifest_json);
  if (manifest.schema_version != kSchemaVersion) {
    throw std::runtime_error("database schema version " + std::to_string(manifest.schema_version) +
                             " not supported by this build (expected " +
                             std::to_string(kSchemaVersion) + ")");
  }

  std::ifstream entries_in(dir / "entries.jsonl", std::ios::binary);
  if (!entries_in) throw std::runtime_error("cannot read " + (dir / "entries.jsonl").string());
  std::ostringstream buffer;
  buffer << entries_in.rdbuf();
  const std::string entries_blob = buffer.str();
  if (sha256_hex(entries_blob) != manifest.entries_sha256) {
    throw std::runtime_error("database corruption: entries checksum mismatch in " + dir.string());
  }

  std::vector<DatabaseEntry> entries;
  entries.reserve(manifest.entry_count);
  std::istringstream lines(entries_blob);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    json record = json::parse(line);
    DatabaseEntry entry;
    entry.id = record.at("id").get<std::string>();
    entry.key_text = record.at("key_text").get<std::string>();
    entry.sample.id = entry.id;
    entry.sample.input_text = record.at("input_text").get<std::string>();
    entry.sample.corrected_text = record.at("corrected_text").get<std::string>();
    entry.sample.language = manifest.language;
    entry.key_vector.values = record.at("vector").get<std::vector<float>>();
    entries.push_back(std::move(entry));
  }
  if (entries.size() != manifest.entry_count) {
    throw std::runtime_error("database corruption: expected " +
                             std::to_string(manifest.entry_count) + " entries, found " +
                             std::to_string(entries.size()));
  }
  const auto kind = database_kind_from_name(manifest.kind);
  return SampleDatabase(kind, std::move(entries), std::move(manifest));
}

// --- build -------------------------------------------------------------------

json BuildReport::to_json() const {
  return json{{"explained", explained},
              {"failed", failed},
              {"correct_count", correct_count},
              {"erroneous_count", erroneous_count},
              {"wall_seconds", wall_seconds}};
}

namespace {

CompletionRequest explanation_request(const std::string& prompt, const BuildConfig& config) {
  CompletionRequest request;
  request.model_name = config.teacher_model;
  request.messages = {{Role::User, prompt}};
  request.temperature = 0.0;
  request.max_output_tokens = config.max_output_tokens;
  return request;
}

std::string quoted(const std::string& text) { return "\"" + text + "\""; }

}  // namespace

std::string format_edit_lines(const TokenSequence& source, const std::vector<EditSpan>& edits) {
  std::string out;
  for (const auto& edit : edits) {
    if (!out.empty()) out.push_back('\n');
    const auto span_text = [&](int begin, int end) {
      TokenSequence run;
      run.mode = source.mode;
      for (int i = begin; i < end; ++i) run.tokens.push_back(source.tokens[i]);
      return run.joined();
    };
    if (edit.is_insertion()) {
      if (edit.start == 0) {
        out += "insert " + quoted(edit.replacement) + " at the beginning";
      } else if (edit.start == static_cast<int>(source.tokens.size())) {
        out += "insert " + quoted(edit.replacement) + " at the end";
      } else {
        out += "insert " + quoted(edit.replacement) + " between " +
               quoted(source.tokens[edit.start - 1]) + " and " + quoted(source.tokens[edit.start]);
      }
    } else if (edit.replacement.empty()) {
      out += "delete " + quoted(span_text(edit.start, edit.end));
    } else {
      out += "replace " + quoted(span_text(edit.start, edit.end)) + " with " +
             quoted(edit.replacement);
    }
  }
  return out;
}

ExplainedSample generate_explanation(Backend& teacher, const ResponseCache* cache,
                                     const PromptCatalog& prompts, const BuildConfig& config,
                                     const Sample& sample) {
  const auto prompt = render_template(prompts.get(kExplanationTemplate),
                                      {{"text", sample.input_text}, {"label", sample.corrected_text}});
  const auto response = cached_complete(cache, teacher, explanation_request(prompt, config));
  if (trim(response.text).empty()) {
    throw std::runtime_error("empty explanation response for sample " + sample.id);
  }
  return {sample, response.text};
}

ExplainedSample generate_explanation_with_edits(Backend& teacher, const ResponseCache* cache,
                                                const PromptCatalog& prompts,
                                                const BuildConfig& config, const Sample& sample,
                                                const std::vector<EditSpan>& edits) {
  if (edits.empty()) {
    throw std::invalid_argument("edits-guided explanation needs at least one edit (sample " +
                                sample.id + ")");
  }
  const auto mode = token_mode_for_language(sample.language);
  const auto edit_lines = format_edit_lines(tokenize(sample.input_text, mode), edits);
  const auto prompt = render_template(prompts.get(kExplanationEditsTemplate),
                                      {{"text", sample.input_text},
                                       {"label", sample.corrected_text},
                                       {"edits", edit_lines}});
  const auto response = cached_complete(cache, teacher, explanation_request(prompt, config));
  if (trim(response.text).empty()) {
    throw std::runtime_error("empty explanation response for sample " + sample.id);
  }
  return {sample, response.text};
}

BuildOutput build_database(const std::vector<Sample>& samples, Backend& teacher,
                           const ResponseCache* cache, Embedder& embedder,
                           const PromptCatalog& prompts, const BuildConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto split = split_by_correctness(samples);
  const auto mode = token_mode_for_language(config.language);

  BuildReport report;
  std::mutex report_mutex;

  // Erroneous side: explanation keys.
  std::vector<std::optional<DatabaseEntry>> erroneous_slots(split.erroneous.size());
  parallel_for(split.erroneous.size(), config.jobs, [&](std::size_t i) {
    const Sample& sample = split.erroneous[i];
    try {
      ExplainedSample explained;
      if (config.use_edits_template) {
        const auto edits =
            extract_edits(tokenize(sample.input_text, mode), tokenize(sample.corrected_text, mode));
        explained = generate_explanation_with_edits(teacher, cache, prompts, config, sample, edits);
      } else {
        explained = generate_explanation(teacher, cache, prompts, config, sample);
      }
      DatabaseEntry entry;
      entry.id = sample.id;
      entry.key_text = explained.explanation;
      entry.sample = sample;
      entry.key_vector = embedder.embed(entry.key_text);
      erroneous_slots[i] = std::move(entry);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(report_mutex);
      report.failures.push_back(sample.id + ": " + e.what());
    }
  });

  // Correct side: input-text keys.
  std::vector<std::optional<DatabaseEntry>> correct_slots(split.correct.size());
  parallel_for(split.correct.size(), config.jobs, [&](std::size_t i) {
    const Sample& sample = split.correct[i];
    try {
      DatabaseEntry entry;
      entry.id = sample.id;
      entry.key_text = sample.input_text;
      entry.sample = sample;
      entry.key_vector = embedder.embed(entry.key_text);
      correct_slots[i] = std::move(entry);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(report_mutex);
      report.failures.push_back(sample.id + ": " + e.what());
    }
  });

  std::vector<DatabaseEntry> erroneous_entries;
  for (auto& slot : erroneous_slots) {
    if (slot) erroneous_entries.push_back(std::move(*slot));
  }
  std::vector<DatabaseEntry> correct_entries;
  for (auto& slot : correct_slots) {
    if (slot) correct_entries.push_back(std::move(*slot));
  }

  DatabaseManifest base;
  base.corpus_name = config.corpus_name;
  base.language = config.language;
  base.teacher_model = config.teacher_model;
  base.embedder_id = embedder.id();
  base.created_at = iso_timestamp_now();

  report.explained = erroneous_entries.size();
  report.failed = split.erroneous.size() - erroneous_entries.size() +
                  (split.correct.size() - correct_entries.size());
  report.erroneous_count = erroneous_entries.size();
  report.correct_count = correct_entries.size();
  std::sort(report.failures.begin(), report.failures.end());

  BuildOutput output{
      SampleDatabase(DatabaseKind::Erroneous, std::move(erroneous_entries), base),
      SampleDatabase(DatabaseKind::Correct, std::move(correct_entries), base),
      std::move(report)};
  output.report.wall_seconds = elapsed_seconds(start);
  return output;
}

}  // namespace gee
