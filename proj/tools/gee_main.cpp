#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gee/backend.hpp"
#include "gee/cache.hpp"
#include "gee/corpus.hpp"
#include "gee/database.hpp"
#include "gee/embedding.hpp"
#include "gee/eval.hpp"
#include "gee/pipeline.hpp"
#include "gee/prompts.hpp"
#include "gee/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

struct CommonOptions {
  std::string api_base;
  std::string api_key;
  std::string cache_dir;
  std::string prompt_dir;
  unsigned jobs = 0;
  bool force = false;
};

void add_common_options(CLI::App& cmd, CommonOptions& options) {
  cmd.set_config("--config", "", "Config file; flags and environment override it");
  cmd.add_option("--api-base", options.api_base, "Remote API base url");
  cmd.add_option("--api-key", options.api_key, "Remote API credential");
  cmd.add_option("--cache-dir", options.cache_dir, "Response cache directory");
  cmd.add_option("--prompt-dir", options.prompt_dir, "Directory of prompt template files");
  cmd.add_option("--jobs", options.jobs, "Worker pool width (0 = hardware threads)");
  cmd.add_flag("--force", options.force, "Overwrite existing output files");
}

// Precedence is config file < flags < environment.
void apply_environment(CommonOptions& options) {
  if (const char* v = std::getenv("GEE_API_BASE")) options.api_base = v;
  if (const char* v = std::getenv("GEE_API_KEY")) options.api_key = v;
  if (const char* v = std::getenv("GEE_CACHE_DIR")) options.cache_dir = v;
}

gee::RemoteConfig remote_config(const CommonOptions& options) {
  gee::RemoteConfig config;
  config.base_url = options.api_base;
  config.api_key = options.api_key;
  return config;
}

gee::PromptCatalog load_prompts(const CommonOptions& options) {
  auto catalog = gee::PromptCatalog::builtin();
  if (!options.prompt_dir.empty()) catalog.load_directory(options.prompt_dir);
  return catalog;
}

std::unique_ptr<gee::ResponseCache> open_cache(const CommonOptions& options) {
  if (options.cache_dir.empty()) return nullptr;
  return std::make_unique<gee::ResponseCache>(options.cache_dir);
}

void refuse_overwrite(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw std::runtime_error("refusing to overwrite " + path.string() + " (use --force)");
  }
}

void write_output_file(const fs::path& path, const std::string& content, bool force) {
  refuse_overwrite(path, force);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

gee::ParallelFormat parallel_format_for(const std::string& format, const fs::path& path) {
  if (format == "tsv") return gee::ParallelFormat::Tsv;
  if (format == "jsonl") return gee::ParallelFormat::Jsonl;
  if (format == "auto") {
    return path.extension() == ".jsonl" ? gee::ParallelFormat::Jsonl : gee::ParallelFormat::Tsv;
  }
  throw std::runtime_error("unknown corpus format: " + format);
}

std::vector<gee::Sample> load_parallel_file(const fs::path& path, const std::string& format,
                                            const std::string& name, const std::string& language) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path.string());
  return gee::parse_parallel(in, parallel_format_for(format, path), name, language);
}

std::vector<std::string> load_test_sources(const fs::path& path, std::string format) {
  if (format == "auto") {
    if (path.extension() == ".tsv") format = "tsv";
    else if (path.extension() == ".jsonl") format = "jsonl";
    else format = "text";
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read test file: " + path.string());
  std::vector<std::string> sources;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (format == "text") {
      sources.push_back(line);
    } else if (format == "tsv") {
      sources.push_back(line.substr(0, line.find('\t')));
    } else if (format == "jsonl") {
      json record = json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.contains("text")) {
        throw std::runtime_error("malformed test record at line " + std::to_string(line_no));
      }
      sources.push_back(record["text"].get<std::string>());
    } else {
      throw std::runtime_error("unknown test format: " + format);
    }
  }
  return sources;
}

struct LoadedPredictions {
  std::vector<std::string> sources;  // empty for plain-text predictions
  std::vector<std::string> hypotheses;
};

LoadedPredictions load_predictions(const fs::path& path, std::string format) {
  if (format == "auto") format = path.extension() == ".jsonl" ? "jsonl" : "text";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read predictions file: " + path.string());
  LoadedPredictions loaded;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format == "text") {
      loaded.hypotheses.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("hypothesis")) {
      throw std::runtime_error("malformed prediction record at line " + std::to_string(line_no));
    }
    loaded.hypotheses.push_back(record["hypothesis"].get<std::string>());
    loaded.sources.push_back(record.value("source", std::string()));
  }
  return loaded;
}

double round4(double value) { return std::round(value * 10000.0) / 10000.0; }

json report_to_json(const gee::ScoreReport& report) {
  return json{{"tp", report.tp},
              {"fp", report.fp},
              {"fn", report.fn},
              {"precision", round4(report.precision)},
              {"recall", round4(report.recall)},
              {"f0_5", round4(report.f_half)},
              {"n_sentences", report.n_sentences}};
}

void print_report(const gee::ScoreReport& report) {
  char line[160];
  std::snprintf(line, sizeof(line),
                "P = %.2f  R = %.2f  F0.5 = %.2f  (tp=%lld fp=%lld fn=%lld, %d sentences)",
                report.precision * 100.0, report.recall * 100.0, report.f_half * 100.0, report.tp,
                report.fp, report.fn, report.n_sentences);
  std::cout << line << "\n";
}

std::string diagnostics_jsonl(const gee::EvaluateResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.diagnostics.size(); ++i) {
    const auto& diag = result.diagnostics[i];
    json sys = json::array();
    for (const auto& edit : diag.sys_edits) {
      sys.push_back({{"start", edit.start}, {"end", edit.end}, {"replacement", edit.replacement}});
    }
    json gold = json::array();
    for (const auto& edit : diag.gold_edits) {
      gold.push_back({{"start", edit.start},
                      {"end", edit.end},
                      {"replacement", edit.replacement},
                      {"type", edit.type_label}});
    }
    out += json{{"index", i},
                {"tp", diag.counts.tp},
                {"fp", diag.counts.fp},
                {"fn", diag.counts.fn},
                {"chosen_annotator", diag.counts.chosen_annotator},
                {"sys_edits", std::move(sys)},
                {"gold_edits", std::move(gold)}}
               .dump();
    out += '\n';
  }
  return out;
}

// --- build-db ----------------------------------------------------------------

struct BuildDbArgs {
  CommonOptions common;
  std::string corpus;
  std::string format = "auto";
  std::string language;
  std::string name;
  std::string db_dir;
  std::string teacher = "mock:echo";
  std::string embedder = "fallback";
  int min_tokens = 10;
  int max_tokens = 60;
  std::size_t cap = 25000;
  std::uint64_t seed = 0;
  bool explain_with_edits = false;
  double max_failed_frac = 0.1;
};

int run_build_db(const BuildDbArgs& args) {
  auto samples =
      load_parallel_file(args.corpus, args.format,
                         args.name.empty() ? fs::path(args.corpus).stem().string() : args.name,
                         args.language);
  gee::FilterConfig filter;
  filter.min_tokens = args.min_tokens;
  filter.max_tokens = args.max_tokens;
  filter.cap = args.cap;
  filter.seed = args.seed;
  const auto filtered = gee::filter_samples(samples, filter);

  const auto remote = remote_config(args.common);
  auto teacher = gee::make_backend(args.teacher, remote);
  auto embedder = gee::make_embedder(args.embedder, remote);
  const auto prompts = load_prompts(args.common);
  auto cache = open_cache(args.common);

  gee::BuildConfig config;
  config.corpus_name = args.name.empty() ? fs::path(args.corpus).stem().string() : args.name;
  config.language = args.language;
  config.teacher_model = teacher.model_name;
  config.use_edits_template = args.explain_with_edits;
  config.jobs = args.common.jobs;

  auto output = gee::build_database(filtered, *teacher.backend, cache.get(),
                                    *embedder, prompts, config);

  const fs::path db_dir(args.db_dir);
  for (const char* side : {"erroneous", "correct"}) {
    if (fs::exists(db_dir / side / "manifest.json") && !args.common.force) {
      throw std::runtime_error("database already exists at " + (db_dir / side).string() +
                               " (use --force)");
    }
  }
  output.erroneous.persist(db_dir / "erroneous");
  output.correct.persist(db_dir / "correct");

  json report = output.report.to_json();
  if (!output.report.failures.empty()) report["failures"] = output.report.failures;
  std::cout << report.dump(2) << "\n";

  const auto attempts = output.report.explained + output.report.failed;
  if (output.report.failed > 0 &&
      static_cast<double>(output.report.failed) > args.max_failed_frac * static_cast<double>(attempts)) {
    return kExitPartial;
  }
  return kExitOk;
}

// --- predict -----------------------------------------------------------------

struct PredictArgs {
  CommonOptions common;
  std::string db_dir;
  std::string test_file;
  std::string test_format = "auto";
  std::string out_dir;
  std::string strategy = "explanation";
  int k_erroneous = 4;
  int k_correct = 4;
  std::uint64_t seed = 0;
  std::string explanation_mode = "none";
  std::string detection_template = gee::kDetectionDetailedTemplate;
  bool bm25_detection = false;
  std::string predictor;
  std::string embedder = "fallback";
  std::string language;  // optional declaration of the test language
};

gee::RunConfig run_config_from(const PredictArgs& args, const std::string& predictor_model) {
  gee::RunConfig config;
  config.k_erroneous = args.k_erroneous;
  config.k_correct = args.k_correct;
  config.strategy = gee::strategy_from_name(args.strategy);
  config.seed = args.seed;
  config.explanation_mode = gee::explanation_mode_from_name(args.explanation_mode);
  config.predictor_model = predictor_model;
  config.detection_template = args.detection_template;
  config.bm25_detection_query = args.bm25_detection;
  config.jobs = args.common.jobs;
  return config;
}

json cli_echo(const PredictArgs& args) {
  return json{{"db", args.db_dir},
              {"test", args.test_file},
              {"out", args.out_dir},
              {"predictor", args.predictor},
              {"embedder", args.embedder},
              {"prompt_dir", args.common.prompt_dir},
              {"cache_dir", args.common.cache_dir},
              {"jobs", args.common.jobs}};
}

void warn_language_mismatch(const gee::SampleDatabase& err_db, const gee::SampleDatabase& corr_db,
                            const std::string& declared) {
  if (err_db.manifest().language != corr_db.manifest().language) {
    std::cerr << "warning: erroneous and correct databases declare different languages ("
              << err_db.manifest().language << " vs " << corr_db.manifest().language << ")\n";
  }
  if (!declared.empty() && declared != err_db.manifest().language) {
    std::cerr << "warning: test language " << declared << " does not match database language "
              << err_db.manifest().language << "\n";
  }
}

int run_predict(const PredictArgs& args) {
  if (args.predictor.empty()) {
    throw std::runtime_error("a predictor backend is required (--predictor)");
  }
  refuse_overwrite(fs::path(args.out_dir) / "predictions.jsonl", args.common.force);
  refuse_overwrite(fs::path(args.out_dir) / "run.json", args.common.force);
  const auto err_db = gee::SampleDatabase::load(fs::path(args.db_dir) / "erroneous");
  const auto corr_db = gee::SampleDatabase::load(fs::path(args.db_dir) / "correct");
  warn_language_mismatch(err_db, corr_db, args.language);

  const auto sources = load_test_sources(args.test_file, args.test_format);
  const auto remote = remote_config(args.common);
  auto predictor = gee::make_backend(args.predictor, remote);
  auto embedder = gee::make_embedder(args.embedder, remote);
  const auto prompts = load_prompts(args.common);
  auto cache = open_cache(args.common);

  const auto config = run_config_from(args, predictor.model_name);
  auto output = gee::run_batch(sources, err_db, corr_db, config, *predictor.backend,
                               cache.get(), *embedder, prompts);

  const fs::path out_dir(args.out_dir);
  json manifest = output.manifest.to_json();
  manifest["cli"] = cli_echo(args);
  write_output_file(out_dir / "predictions.jsonl", gee::predictions_to_jsonl(output),
                    args.common.force);
  write_output_file(out_dir / "run.json", manifest.dump(2) + "\n", args.common.force);

  std::cout << "predicted " << (output.predictions.size() - output.manifest.failed_items) << "/"
            << output.predictions.size() << " items";
  if (output.manifest.failed_items > 0) {
    std::cout << " (" << output.manifest.failed_items << " failed)";
  }
  std::cout << "\n";
  return output.manifest.failed_items > 0 ? kExitPartial : kExitOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  CommonOptions common;
  std::string predictions;
  std::string pred_format = "auto";
  std::vector<std::string> gold;
  std::string gold_format = "m2";
  std::string mode = "whitespace";
  std::string report_path;
  std::string diagnostics_path;
};

gee::EvaluateResult evaluate_with_gold(const std::vector<std::string>& pred_sources,
                                       const std::vector<std::string>& hypotheses,
                                       const EvaluateArgs& args) {
  const auto mode = gee::token_mode_from_name(args.mode);
  if (args.gold.empty()) throw std::runtime_error("a gold file is required (--gold)");
  if (args.gold_format == "m2") {
    if (args.gold.size() != 1) throw std::runtime_error("m2 gold takes exactly one file");
    std::ifstream in(args.gold.front());
    if (!in) throw std::runtime_error("cannot read gold file: " + args.gold.front());
    const auto gold = gee::parse_m2(in);
    if (pred_sources.size() == gold.size()) {
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!pred_sources[i].empty() && pred_sources[i] != gold[i].source_text) ++mismatches;
      }
      if (mismatches > 0) {
        std::cerr << "warning: " << mismatches
                  << " prediction sources differ from the gold sentences\n";
      }
    }
    return gee::evaluate_m2(hypotheses, gold, mode);
  }
  if (args.gold_format == "parallel") {
    std::vector<std::string> sources;
    std::vector<std::vector<std::string>> reference_sets;
    for (const auto& path : args.gold) {
      const auto pairs = load_parallel_file(path, "auto", fs::path(path).stem().string(), "");
      std::vector<std::string> refs;
      refs.reserve(pairs.size());
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (sources.size() <= i) sources.push_back(pairs[i].input_text);
        refs.push_back(pairs[i].corrected_text);
      }
      reference_sets.push_back(std::move(refs));
    }
    if (!pred_sources.empty() && pred_sources.size() == sources.size()) {
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < sources.size(); ++i) {
        if (!pred_sources[i].empty() && pred_sources[i] != sources[i]) ++mismatches;
      }
      if (mismatches > 0) {
        std::cerr << "warning: " << mismatches
                  << " prediction sources differ from the gold inputs\n";
      }
    }
    return gee::evaluate_parallel(sources, hypotheses, reference_sets, mode);
  }
  throw std::runtime_error("unknown gold format: " + args.gold_format);
}

int run_evaluate(const EvaluateArgs& args) {
  const auto loaded = load_predictions(args.predictions, args.pred_format);
  const auto result = evaluate_with_gold(loaded.sources, loaded.hypotheses, args);
  print_report(result.report);
  if (!args.report_path.empty()) {
    write_output_file(args.report_path, report_to_json(result.report).dump(2) + "\n",
                      args.common.force);
  }
  if (!args.diagnostics_path.empty()) {
    write_output_file(args.diagnostics_path, diagnostics_jsonl(result), args.common.force);
  }
  return kExitOk;
}

// --- ablate ------------------------------------------------------------------

struct AblateArgs {
  PredictArgs predict;
  std::vector<std::string> gold;
  std::string gold_format = "m2";
  std::string mode = "whitespace";
  int total = 8;
};

std::vector<gee::GoldAnnotatedSample> load_gold(const AblateArgs& args,
                                                const std::vector<std::string>& sources) {
  const auto mode = gee::token_mode_from_name(args.mode);
  if (args.gold.empty()) throw std::runtime_error("a gold file is required (--gold)");
  if (args.gold_format == "m2") {
    if (args.gold.size() != 1) throw std::runtime_error("m2 gold takes exactly one file");
    std::ifstream in(args.gold.front());
    if (!in) throw std::runtime_error("cannot read gold file: " + args.gold.front());
    return gee::parse_m2(in);
  }
  if (args.gold_format == "parallel") {
    std::vector<std::vector<std::string>> reference_sets;
    for (const auto& path : args.gold) {
      const auto pairs = load_parallel_file(path, "auto", fs::path(path).stem().string(), "");
      std::vector<std::string> refs;
      refs.reserve(pairs.size());
      for (const auto& pair : pairs) refs.push_back(pair.corrected_text);
      reference_sets.push_back(std::move(refs));
    }
    return gee::gold_from_references(sources, reference_sets, mode);
  }
  throw std::runtime_error("unknown gold format: " + args.gold_format);
}

int run_ablate(const AblateArgs& args) {
  const auto& p = args.predict;
  if (p.predictor.empty()) throw std::runtime_error("a predictor backend is required (--predictor)");
  refuse_overwrite(fs::path(p.out_dir) / "sweep.tsv", p.common.force);
  refuse_overwrite(fs::path(p.out_dir) / "summary.json", p.common.force);
  const auto err_db = gee::SampleDatabase::load(fs::path(p.db_dir) / "erroneous");
  const auto corr_db = gee::SampleDatabase::load(fs::path(p.db_dir) / "correct");
  warn_language_mismatch(err_db, corr_db, p.language);

  const auto sources = load_test_sources(p.test_file, p.test_format);
  const auto gold = load_gold(args, sources);
  const auto remote = remote_config(p.common);
  auto predictor = gee::make_backend(p.predictor, remote);
  auto embedder = gee::make_embedder(p.embedder, remote);
  const auto prompts = load_prompts(p.common);
  auto cache = open_cache(p.common);

  const auto config = run_config_from(p, predictor.model_name);
  const auto mode = gee::token_mode_from_name(args.mode);
  auto rows = gee::sweep_kc(sources, err_db, corr_db, config, *predictor.backend,
                            cache.get(), *embedder, prompts, gold, mode, args.total);

  const fs::path out_dir(p.out_dir);
  write_output_file(out_dir / "sweep.tsv", gee::sweep_to_tsv(rows), p.common.force);

  int best_k = 0;
  double best_f = -1.0;
  std::size_t failed_items = 0;
  json row_array = json::array();
  for (const auto& row : rows) {
    const fs::path row_dir = out_dir / ("k" + std::to_string(row.k_correct));
    json manifest = row.run.manifest.to_json();
    manifest["cli"] = cli_echo(p);
    write_output_file(row_dir / "predictions.jsonl", gee::predictions_to_jsonl(row.run),
                      p.common.force);
    write_output_file(row_dir / "run.json", manifest.dump(2) + "\n", p.common.force);
    failed_items += row.run.manifest.failed_items;
    row_array.push_back({{"k_correct", row.k_correct},
                         {"k_erroneous", row.k_erroneous},
                         {"report", report_to_json(row.report)}});
    if (row.report.f_half > best_f) {
      best_f = row.report.f_half;
      best_k = row.k_correct;
    }
  }
  const json summary = {{"lineage_id", rows.front().run.manifest.lineage_id},
                        {"total", args.total},
                        {"best_k_correct", best_k},
                        {"best_f0_5", round4(best_f)},
                        {"rows", std::move(row_array)}};
  write_output_file(out_dir / "summary.json", summary.dump(2) + "\n", p.common.force);

  char line[96];
  std::snprintf(line, sizeof(line), "best k_C = %d (F0.5 = %.2f)", best_k, best_f * 100.0);
  std::cout << gee::sweep_to_tsv(rows) << line << "\n";
  return failed_items > 0 ? kExitPartial : kExitOk;
}

// --- detect ------------------------------------------------------------------

struct DetectArgs {
  CommonOptions common;
  std::string db_dir;
  std::string text;
  std::string predictor;
  std::string embedder = "fallback";
  std::string detection_template = gee::kDetectionDetailedTemplate;
  bool bm25_detection = false;
  int k = 5;
};

int run_detect(const DetectArgs& args) {
  if (args.predictor.empty()) throw std::runtime_error("a predictor backend is required (--predictor)");
  const auto err_db = gee::SampleDatabase::load(fs::path(args.db_dir) / "erroneous");
  const auto corr_db = gee::SampleDatabase::load(fs::path(args.db_dir) / "correct");

  const auto remote = remote_config(args.common);
  auto predictor = gee::make_backend(args.predictor, remote);
  auto embedder = gee::make_embedder(args.embedder, remote);
  const auto prompts = load_prompts(args.common);
  auto cache = open_cache(args.common);

  gee::RunConfig config;
  config.predictor_model = predictor.model_name;
  config.detection_template = args.detection_template;
  const auto detection = gee::detect(*predictor.backend, cache.get(), prompts,
                                     config, args.text);
  std::cout << "[initial explanation]\n" << detection.initial_explanation << "\n\n";

  const auto print_hits = [](const char* label, const gee::QueryResult& result) {
    std::cout << "[" << label << "]\n";
    for (const auto& hit : result.hits) {
      char head[64];
      std::snprintf(head, sizeof(head), "%2d  %.4f  ", hit.rank, hit.score);
      std::cout << head << hit.id << "\n    " << hit.key_text << "\n";
    }
    for (const auto& note : result.notes) std::cout << "note: " << note << "\n";
  };
  const auto query = gee::trim(detection.initial_explanation).empty() ? args.text
                                                                      : detection.initial_explanation;
  print_hits("erroneous database", args.bm25_detection
                                       ? err_db.bm25_query(query, args.k)
                                       : err_db.knn_query(query, args.k, *embedder));
  std::cout << "\n";
  print_hits("correct database", corr_db.knn_query(args.text, args.k, *embedder));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation-indexed demonstration retrieval for few-shot GEC"};
  app.require_subcommand(1);

  BuildDbArgs build_args;
  auto* build = app.add_subcommand("build-db", "Build the dual sample database from a corpus");
  add_common_options(*build, build_args.common);
  build->add_option("--corpus", build_args.corpus, "Parallel corpus file")->required();
  build->add_option("--format", build_args.format, "Corpus format: tsv|jsonl|auto");
  build->add_option("--lang", build_args.language, "Corpus language code")->required();
  build->add_option("--name", build_args.name, "Corpus name used in sample ids");
  build->add_option("--db", build_args.db_dir, "Output database directory")->required();
  build->add_option("--teacher", build_args.teacher, "Teacher backend spec");
  build->add_option("--embedder", build_args.embedder, "Embedder spec: fallback|remote:<model>");
  build->add_option("--min-tokens", build_args.min_tokens, "Minimum input length in tokens");
  build->add_option("--max-tokens", build_args.max_tokens, "Maximum input length in tokens");
  build->add_option("--cap", build_args.cap, "Maximum number of samples kept");
  build->add_option("--seed", build_args.seed, "Subsampling seed");
  build->add_flag("--explain-with-edits", build_args.explain_with_edits,
                  "Use the edits-guided explanation prompt");
  build->add_option("--max-failed-frac", build_args.max_failed_frac,
                    "Failure fraction above which the exit status is 2");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Run few-shot correction over a test set");
  add_common_options(*predict, predict_args.common);
  predict->add_option("--db", predict_args.db_dir, "Database directory")->required();
  predict->add_option("--test", predict_args.test_file, "Test file")->required();
  predict->add_option("--test-format", predict_args.test_format, "text|tsv|jsonl|auto");
  predict->add_option("--out", predict_args.out_dir, "Output directory")->required();
  predict->add_option("--strategy", predict_args.strategy,
                      "explanation|semantic|bm25|random");
  predict->add_option("--k-e", predict_args.k_erroneous, "Erroneous demonstrations");
  predict->add_option("--k-c", predict_args.k_correct, "Correct demonstrations");
  predict->add_option("--seed", predict_args.seed, "Seed for random selection");
  predict->add_option("--explanation-mode", predict_args.explanation_mode, "none|pre|post");
  predict->add_option("--detection-template", predict_args.detection_template,
                      "Detection template name");
  predict->add_flag("--bm25-detection", predict_args.bm25_detection,
                    "Match the detection output by BM25 instead of kNN");
  predict->add_option("--predictor", predict_args.predictor, "Predictor backend spec");
  predict->add_option("--embedder", predict_args.embedder, "Embedder spec");
  predict->add_option("--lang", predict_args.language, "Declared test language");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold annotations");
  add_common_options(*evaluate, eval_args.common);
  evaluate->add_option("--pred", eval_args.predictions, "Predictions file")->required();
  evaluate->add_option("--pred-format", eval_args.pred_format, "jsonl|text|auto");
  evaluate->add_option("--gold", eval_args.gold, "Gold file (repeatable for parallel format)")
      ->required();
  evaluate->add_option("--gold-format", eval_args.gold_format, "m2|parallel");
  evaluate->add_option("--mode", eval_args.mode, "Tokenization mode: whitespace|character");
  evaluate->add_option("--report", eval_args.report_path, "Write the report JSON here");
  evaluate->add_option("--diagnostics", eval_args.diagnostics_path,
                       "Write per-sentence diagnostics JSONL here");

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Sweep the correct/erroneous demonstration ratio");
  add_common_options(*ablate, ablate_args.predict.common);
  ablate->add_option("--db", ablate_args.predict.db_dir, "Database directory")->required();
  ablate->add_option("--test", ablate_args.predict.test_file, "Test file")->required();
  ablate->add_option("--test-format", ablate_args.predict.test_format, "text|tsv|jsonl|auto");
  ablate->add_option("--out", ablate_args.predict.out_dir, "Output directory")->required();
  ablate->add_option("--strategy", ablate_args.predict.strategy,
                     "explanation|semantic|bm25|random");
  ablate->add_option("--seed", ablate_args.predict.seed, "Seed for random selection");
  ablate->add_option("--explanation-mode", ablate_args.predict.explanation_mode, "none|pre|post");
  ablate->add_option("--detection-template", ablate_args.predict.detection_template,
                     "Detection template name");
  ablate->add_flag("--bm25-detection", ablate_args.predict.bm25_detection,
                   "Match the detection output by BM25 instead of kNN");
  ablate->add_option("--predictor", ablate_args.predict.predictor, "Predictor backend spec");
  ablate->add_option("--embedder", ablate_args.predict.embedder, "Embedder spec");
  ablate->add_option("--lang", ablate_args.predict.language, "Declared test language");
  ablate->add_option("--gold", ablate_args.gold, "Gold file (repeatable for parallel format)")
      ->required();
  ablate->add_option("--gold-format", ablate_args.gold_format, "m2|parallel");
  ablate->add_option("--mode", ablate_args.mode, "Tokenization mode: whitespace|character");
  ablate->add_option("--total", ablate_args.total, "Total demonstrations per run");

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "Debug: print the detection output and neighbors");
  add_common_options(*detect, detect_args.common);
  detect->add_option("--db", detect_args.db_dir, "Database directory")->required();
  detect->add_option("--text", detect_args.text, "Input sentence")->required();
  detect->add_option("--predictor", detect_args.predictor, "Predictor backend spec");
  detect->add_option("--embedder", detect_args.embedder, "Embedder spec");
  detect->add_option("--detection-template", detect_args.detection_template,
                     "Detection template name");
  detect->add_flag("--bm25-detection", detect_args.bm25_detection,
                   "Match the detection output by BM25 instead of kNN");
  detect->add_option("--k", detect_args.k, "Neighbors to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build) {
      apply_environment(build_args.common);
      return run_build_db(build_args);
    }
    if (*predict) {
      apply_environment(predict_args.common);
      return run_predict(predict_args);
    }
    if (*evaluate) {
      apply_environment(eval_args.common);
      return run_evaluate(eval_args);
    }
    if (*ablate) {
      apply_environment(ablate_args.predict.common);
      return run_ablate(ablate_args);
    }
    if (*detect) {
      apply_environment(detect_args.common);
      return run_detect(detect_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
