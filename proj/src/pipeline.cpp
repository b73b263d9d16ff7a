#include "gee/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>

#include "gee/provenance.hpp"
#include "gee/sha256.hpp"
#include "gee/text.hpp"
#include "gee/worker_pool.hpp"

namespace gee {

using nlohmann::json;

namespace {

constexpr char kOpenErr[] = "<erroneous sentence>";
constexpr char kCloseErr[] = "</erroneous sentence>";
constexpr char kOpenCorr[] = "<corrected sentence>";
constexpr char kCloseCorr[] = "</corrected sentence>";
constexpr char kOpenExpl[] = "<explanation>";
constexpr char kCloseExpl[] = "</explanation>";
constexpr char kNoErrorExplanation[] = "No error in text";

}  // namespace

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::Explanation: return "explanation";
    case Strategy::Semantic: return "semantic";
    case Strategy::Bm25: return "bm25";
    case Strategy::Random: return "random";
  }
  throw std::logic_error("bad strategy");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "explanation") return Strategy::Explanation;
  if (name == "semantic") return Strategy::Semantic;
  if (name == "bm25") return Strategy::Bm25;
  if (name == "random") return Strategy::Random;
  throw std::invalid_argument("unknown retrieval strategy: " + name);
}

std::string explanation_mode_name(ExplanationMode mode) {
  switch (mode) {
    case ExplanationMode::None: return "none";
    case ExplanationMode::Pre: return "pre";
    case ExplanationMode::Post: return "post";
  }
  throw std::logic_error("bad explanation mode");
}

ExplanationMode explanation_mode_from_name(const std::string& name) {
  if (name == "none") return ExplanationMode::None;
  if (name == "pre") return ExplanationMode::Pre;
  if (name == "post") return ExplanationMode::Post;
  throw std::invalid_argument("unknown explanation mode: " + name);
}

json RunConfig::to_json() const {
  return json{{"k_erroneous", k_erroneous},
              {"k_correct", k_correct},
              {"strategy", strategy_name(strategy)},
              {"seed", seed},
              {"explanation_mode", explanation_mode_name(explanation_mode)},
              {"predictor_model", predictor_model},
              {"detection_template", detection_template},
              {"bm25_detection_query", bm25_detection_query},
              {"detection_max_tokens", detection_max_tokens},
              {"correction_max_tokens", correction_max_tokens}};
}

DetectionResult detect(Backend& predictor, const ResponseCache* cache, const PromptCatalog& prompts,
                       const RunConfig& config, const std::string& source) {
  if (trim(source).empty()) throw std::invalid_argument("cannot detect errors in empty text");
  const auto prompt = render_template(prompts.get(config.detection_template), {{"source", source}});
  CompletionRequest request;
  request.model_name = config.predictor_model;
  request.messages = {{Role::User, prompt}};
  request.temperature = 0.0;
  request.max_output_tokens = config.detection_max_tokens;
  const auto response = cached_complete(cache, predictor, request);
  return {source, response.text};
}

namespace {

// Fetches k hits while skipping entries whose input text equals the source,
// asking the underlying query for enough extras to fill the gaps.
QueryResult query_side(const SampleDatabase& db, Strategy strategy, bool bm25_for_knn_side,
                       const std::string& query_text, int k, std::uint64_t seed,
                       Embedder& embedder, const std::string& exclude_input) {
  int excluded = 0;
  for (const auto& entry : db.entries()) {
    if (entry.sample.input_text == exclude_input) ++excluded;
  }
  const int fetch = k + excluded;
  QueryResult raw;
  switch (strategy) {
    case Strategy::Explanation:
      raw = bm25_for_knn_side ? db.bm25_query(query_text, fetch)
                              : db.knn_query(query_text, fetch, embedder);
      break;
    case Strategy::Semantic:
      raw = db.knn_query(query_text, fetch, embedder);
      break;
    case Strategy::Bm25:
      raw = db.bm25_query(query_text, fetch);
      break;
    case Strategy::Random:
      raw = db.random_select(fetch, seed);
      break;
  }
  QueryResult result;
  result.notes = std::move(raw.notes);
  for (auto& hit : raw.hits) {
    if (hit.sample.input_text == exclude_input) continue;
    if (static_cast<int>(result.hits.size()) >= k) break;
    hit.rank = static_cast<int>(result.hits.size()) + 1;
    result.hits.push_back(std::move(hit));
  }
  if (static_cast<int>(result.hits.size()) < k) {
    result.notes.push_back("retrieved " + std::to_string(result.hits.size()) + " of " +
                           std::to_string(k) + " requested demonstrations");
  }
  return result;
}

}  // namespace

DemonstrationSet retrieve_demonstrations(const SampleDatabase& err_db,
                                         const SampleDatabase& corr_db, const std::string& source,
                                         const std::optional<DetectionResult>& detection,
                                         const RunConfig& config, Embedder& embedder) {
  DemonstrationSet demos;
  Strategy err_strategy = config.strategy;
  std::string err_query = source;
  if (config.strategy == Strategy::Explanation) {
    if (!detection.has_value()) {
      throw std::invalid_argument("explanation strategy requires a detection result");
    }
    if (trim(detection->initial_explanation).empty()) {
      err_strategy = Strategy::Semantic;  // stated fallback for empty detections
      demos.notes.push_back("empty detection output: degraded to semantic retrieval");
    } else {
      err_query = detection->initial_explanation;
    }
  }

  auto err_result = query_side(err_db, err_strategy, config.bm25_detection_query, err_query,
                               config.k_erroneous, config.seed, embedder, source);
  // The correct side always queries with the source through the same
  // mechanism family (kNN under the explanation strategy).
  const Strategy corr_strategy =
      err_strategy == Strategy::Explanation ? Strategy::Semantic : err_strategy;
  auto corr_result = query_side(corr_db, corr_strategy, false, source, config.k_correct,
                                config.seed, embedder, source);

  demos.erroneous_query = err_query;
  demos.correct_query = source;
  for (auto& note : err_result.notes) demos.notes.push_back("erroneous: " + note);
  for (auto& note : corr_result.notes) demos.notes.push_back("correct: " + note);

  const auto strategy_label = strategy_name(err_strategy);
  for (auto& hit : err_result.hits) {
    demos.provenance.push_back(
        {hit.id, DatabaseKind::Erroneous, strategy_label, hit.score, hit.rank, hit.key_text});
    demos.erroneous.push_back(std::move(hit.sample));
  }
  for (auto& hit : corr_result.hits) {
    demos.provenance.push_back(
        {hit.id, DatabaseKind::Correct, strategy_label, hit.score, hit.rank, hit.key_text});
    demos.correct.push_back(std::move(hit.sample));
  }
  return demos;
}

std::string assemble_prompt(const PromptCatalog& prompts, const DemonstrationSet& demos,
                            const std::string& source, const RunConfig& config,
                            const std::optional<std::string>& test_explanation) {
  std::string out = prompts.get(kFewShotTemplate).body;

  const auto stanza = [&](const std::string& input, const std::string& corrected,
                          const std::string& explanation) {
    out += '\n';
    out += kOpenErr + input + kCloseErr;
    if (config.explanation_mode == ExplanationMode::Pre) {
      out += '\n';
      out += kOpenExpl + explanation + kCloseExpl;
    }
    out += '\n';
    out += kOpenCorr + corrected + kCloseCorr;
    if (config.explanation_mode == ExplanationMode::Post) {
      out += '\n';
      out += kOpenExpl + explanation + kCloseExpl;
    }
  };

  for (std::size_t i = 0; i < demos.erroneous.size(); ++i) {
    const auto& demo = demos.erroneous[i];
    const std::string key = i < demos.provenance.size() ? demos.provenance[i].key_text : "";
    stanza(demo.input_text, demo.corrected_text, key);
  }
  for (const auto& demo : demos.correct) {
    stanza(demo.input_text, demo.corrected_text, kNoErrorExplanation);
  }

  out += '\n';
  out += kOpenErr + source + kCloseErr;
  if (config.explanation_mode == ExplanationMode::Pre && test_explanation.has_value()) {
    out += '\n';
    out += kOpenExpl + *test_explanation + kCloseExpl;
  }
  out += '\n';
  out += kOpenCorr;
  return out;
}

ParsedHypothesis parse_hypothesis(const std::string& raw, const std::string& source) {
  ParsedHypothesis parsed;
  std::string candidate;
  const auto close = raw.find(kCloseCorr);
  if (close != std::string::npos) {
    candidate = raw.substr(0, close);
  } else {
    parsed.flags.push_back("no_close_tag");
    // First non-empty line of the raw response.
    std::size_t begin = 0;
    while (begin < raw.size()) {
      auto end = raw.find('\n', begin);
      if (end == std::string::npos) end = raw.size();
      const std::string line = raw.substr(begin, end - begin);
      if (!trim(line).empty()) {
        candidate = line;
        break;
      }
      begin = end + 1;
    }
  }
  std::string trimmed = trim(candidate);
  if (trimmed.rfind(kOpenCorr, 0) == 0) {
    trimmed = trim(trimmed.substr(std::string(kOpenCorr).size()));
  }
  if (trimmed.empty()) {
    parsed.flags.push_back("copy_through");
    parsed.hypothesis = source;
  } else {
    parsed.hypothesis = trimmed;
  }
  return parsed;
}

namespace {

std::string derive_lineage(const RunConfig& config, const SampleDatabase& err_db,
                           const SampleDatabase& corr_db) {
  json seed = config.to_json();
  seed["erroneous_checksum"] = err_db.manifest().entries_sha256;
  seed["correct_checksum"] = corr_db.manifest().entries_sha256;
  return sha256_hex(seed.dump()).substr(0, 16);
}

json manifest_json(const DatabaseManifest& manifest) {
  return json{{"kind", manifest.kind},
              {"corpus_name", manifest.corpus_name},
              {"language", manifest.language},
              {"teacher_model", manifest.teacher_model},
              {"embedder_id", manifest.embedder_id},
              {"created_at", manifest.created_at},
              {"entry_count", manifest.entry_count},
              {"entries_sha256", manifest.entries_sha256}};
}

}  // namespace

json RunManifest::to_json() const {
  return json{{"lineage_id", lineage_id},
              {"config", config},
              {"erroneous_db", erroneous_db},
              {"correct_db", correct_db},
              {"predictor_backend", predictor_backend_id},
              {"predictor_model", predictor_model},
              {"cache", json{{"hits", cache_hits}, {"misses", cache_misses}, {"hit_rate", cache_hit_rate}}},
              {"items", items},
              {"failed_items", failed_items},
              {"errors", errors},
              {"wall_seconds", wall_seconds},
              {"created_at", created_at}};
}

RunOutput run_batch(const std::vector<std::string>& test_set, const SampleDatabase& err_db,
                    const SampleDatabase& corr_db, const RunConfig& config, Backend& predictor,
                    const ResponseCache* cache, Embedder& embedder, const PromptCatalog& prompts) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t cache_hits_before = cache ? cache->hits() : 0;
  const std::uint64_t cache_misses_before = cache ? cache->misses() : 0;

  RunOutput output;
  output.predictions.resize(test_set.size());
  std::vector<std::string> errors;
  std::mutex error_mutex;

  const bool needs_detection = config.strategy == Strategy::Explanation ||
                               config.explanation_mode == ExplanationMode::Pre;

  parallel_for(test_set.size(), config.jobs, [&](std::size_t i) {
    Prediction& prediction = output.predictions[i];
    prediction.index = i;
    prediction.source = test_set[i];
    try {
      std::optional<DetectionResult> detection;
      if (needs_detection) {
        detection = detect(predictor, cache, prompts, config, test_set[i]);
        if (trim(detection->initial_explanation).empty()) {
          prediction.flags.push_back("empty_detection");
        }
      }
      prediction.demos =
          retrieve_demonstrations(err_db, corr_db, test_set[i], detection, config, embedder);

      std::optional<std::string> test_explanation;
      if (config.explanation_mode == ExplanationMode::Pre && detection.has_value()) {
        test_explanation = detection->initial_explanation;
      }
      const auto prompt =
          assemble_prompt(prompts, prediction.demos, test_set[i], config, test_explanation);

      CompletionRequest request;
      request.model_name = config.predictor_model;
      request.messages = {{Role::User, prompt}};
      request.temperature = 0.0;
      request.max_output_tokens = config.correction_max_tokens;
      const auto response = cached_complete(cache, predictor, request);

      prediction.raw_response = response.text;
      auto parsed = parse_hypothesis(response.text, test_set[i]);
      prediction.hypothesis = std::move(parsed.hypothesis);
      for (auto& flag : parsed.flags) prediction.flags.push_back(std::move(flag));
      prediction.detection = std::move(detection);
    } catch (const std::exception& e) {
      prediction.hypothesis = test_set[i];  // keep the batch evaluable
      prediction.flags = {"item_error", "copy_through"};
      std::lock_guard<std::mutex> lock(error_mutex);
      errors.push_back(std::to_string(i) + ": " + e.what());
    }
  });

  std::sort(errors.begin(), errors.end());
  RunManifest& manifest = output.manifest;
  manifest.lineage_id =
      config.lineage_id.empty() ? derive_lineage(config, err_db, corr_db) : config.lineage_id;
  manifest.config = config.to_json();
  manifest.erroneous_db = manifest_json(err_db.manifest());
  manifest.correct_db = manifest_json(corr_db.manifest());
  manifest.predictor_backend_id = predictor.id();
  manifest.predictor_model = config.predictor_model;
  if (cache) {
    manifest.cache_hits = cache->hits() - cache_hits_before;
    manifest.cache_misses = cache->misses() - cache_misses_before;
    const auto total = manifest.cache_hits + manifest.cache_misses;
    manifest.cache_hit_rate =
        total == 0 ? 0.0 : static_cast<double>(manifest.cache_hits) / static_cast<double>(total);
  }
  manifest.items = test_set.size();
  manifest.failed_items = errors.size();
  manifest.errors = std::move(errors);
  manifest.wall_seconds = elapsed_seconds(start);
  manifest.created_at = iso_timestamp_now();
  return output;
}

std::string predictions_to_jsonl(const RunOutput& output) {
  std::string out;
  for (const auto& prediction : output.predictions) {
    json demos = json::array();
    for (const auto& demo : prediction.demos.provenance) {
      demos.push_back({{"id", demo.id},
                       {"role", demo.role == DatabaseKind::Erroneous ? "err" : "corr"},
                       {"strategy", demo.strategy},
                       {"score", demo.score},
                       {"rank", demo.rank}});
    }
    json record = {{"index", prediction.index},
                   {"source", prediction.source},
                   {"hypothesis", prediction.hypothesis},
                   {"raw_response", prediction.raw_response},
                   {"demos", std::move(demos)},
                   {"queries", json{{"erroneous", prediction.demos.erroneous_query},
                                    {"correct", prediction.demos.correct_query}}},
                   {"flags", prediction.flags}};
    if (prediction.detection.has_value()) {
      record["detection_text"] = prediction.detection->initial_explanation;
    }
    if (!prediction.demos.notes.empty()) record["notes"] = prediction.demos.notes;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> sweep_kc(const std::vector<std::string>& test_set,
                               const SampleDatabase& err_db, const SampleDatabase& corr_db,
                               const RunConfig& config, Backend& predictor,
                               const ResponseCache* cache, Embedder& embedder,
                               const PromptCatalog& prompts,
                               const std::vector<GoldAnnotatedSample>& gold, TokenMode mode,
                               int total) {
  if (total < 1) throw std::invalid_argument("sweep total must be at least 1");
  std::vector<SweepRow> rows;
  RunConfig row_config = config;
  if (row_config.lineage_id.empty()) {
    row_config.lineage_id = derive_lineage(config, err_db, corr_db);
  }
  for (int k_correct = 0; k_correct <= total; ++k_correct) {
    row_config.k_correct = k_correct;
    row_config.k_erroneous = total - k_correct;
    SweepRow row;
    row.k_correct = k_correct;
    row.k_erroneous = total - k_correct;
    row.run = run_batch(test_set, err_db, corr_db, row_config, predictor, cache, embedder, prompts);
    std::vector<std::string> hypotheses;
    hypotheses.reserve(row.run.predictions.size());
    for (const auto& prediction : row.run.predictions) hypotheses.push_back(prediction.hypothesis);
    row.report = evaluate_m2(hypotheses, gold, mode).report;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
  std::string out = "k_C\tP\tR\tF0.5\n";
  char line[128];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%d\t%.2f\t%.2f\t%.2f\n", row.k_correct,
                  row.report.precision * 100.0, row.report.recall * 100.0,
                  row.report.f_half * 100.0);
    out += line;
  }
  return out;
}

}  // namespace gee
