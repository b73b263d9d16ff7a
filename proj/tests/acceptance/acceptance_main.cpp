// Acceptance suite: runs every release criterion and prints one PASS/FAIL
// line per criterion. Criteria 4 and 6 drive the installed CLI end to end
// with mock backends and a synthetic corpus; everything runs offline.

#include <nlohmann/json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gee/corpus.hpp"
#include "gee/database.hpp"
#include "gee/embedding.hpp"
#include "gee/eval.hpp"
#include "gee/pipeline.hpp"
#include "gee/prompts.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failed = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!detail.empty()) std::cout << " — " << detail;
  std::cout << "\n";
  if (!ok) ++g_failed;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

bool same_bytes(const fs::path& a, const fs::path& b, std::string* why) {
  const auto left = slurp(a);
  const auto right = slurp(b);
  if (left == right) return true;
  *why = a.filename().string() + " differs between runs";
  return false;
}

/// Runs the CLI with the scratch directory as cwd and a pinned epoch so all
/// artifacts are byte-reproducible. Returns the process exit code.
int run_cli(const fs::path& cwd, const std::string& args, const std::string& log_name) {
  const std::string command = "cd '" + cwd.string() + "' && SOURCE_DATE_EPOCH=1700000000 '" +
                              GEE_CLI_PATH "' " + args + " >" + log_name + ".out 2>" + log_name +
                              ".err";
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// --- synthetic corpus ---------------------------------------------------------

const char* kNumberWords[] = {"one", "two",   "three", "four", "five",  "six",
                              "seven", "eight", "nine",  "ten",  "eleven", "twelve"};

struct Family {
  std::string marker;       // phrase present in every erroneous input of the family
  std::string fixed;        // its corrected phrase
  std::string x_template;   // with {n} and the marker
  std::string explanation;  // teacher output
  std::string detection;    // predictor detection output
};

std::vector<Family> families() {
  return {
      {"brother go to", "brother goes to",
       "On day {n} my little brother go to the school with his friends .",
       "Subject-verb agreement error: a singular subject requires goes instead of go .",
       "Verb agreement issue: the singular subject calls for goes rather than go ."},
      {"bought apple from", "bought an apple from",
       "On day {n} she bought apple from the market near the old station .",
       "Article error: the singular countable noun apple needs the article an .",
       "Missing article: apple is countable and needs an before it ."},
      {"good in math", "good at math",
       "On day {n} my cousin said he is very good in math always .",
       "Preposition error: the idiomatic phrase is good at math not good in math .",
       "Preposition issue: good at is the idiomatic choice before math ."},
      {"three dog running", "three dogs running",
       "On day {n} we saw three dog running around the quiet green park .",
       "Number agreement error: the numeral three requires the plural form dogs .",
       "Plural agreement issue: after three the noun must be dogs ."},
      {"uncle eat dinner", "uncle ate dinner",
       "On day {n} my uncle eat dinner very late after the long work .",
       "Tense error: the past context requires ate instead of eat .",
       "Tense issue: the sentence describes the past so eat should be ate ."},
  };
}

std::string with_number(std::string text, const std::string& number) {
  const auto pos = text.find("{n}");
  return text.replace(pos, 3, number);
}

std::string corrected_of(const Family& family, const std::string& x) {
  auto y = x;
  const auto pos = y.find(family.marker);
  return y.replace(pos, family.marker.size(), family.fixed);
}

struct Fixtures {
  fs::path dir;
  fs::path corpus_tsv;
  fs::path test_txt;
  fs::path gold_tsv;
  fs::path teacher_json;
  fs::path predictor_json;
  fs::path partial_predictor_json;
};

Fixtures write_fixtures(const fs::path& scratch) {
  Fixtures fx;
  fx.dir = scratch / "fixtures";
  fs::create_directories(fx.dir);

  // 30 erroneous + 20 correct samples, all 10..60 tokens long.
  std::string corpus;
  for (const auto& family : families()) {
    for (int n = 0; n < 6; ++n) {
      const auto x = with_number(family.x_template, kNumberWords[n]);
      corpus += x + "\t" + corrected_of(family, x) + "\n";
    }
  }
  const char* kCorrectTemplates[] = {
      "On day {n} the weather was very nice and everyone walked home together .",
      "On day {n} our teacher read a long story about the brave sailor .",
      "On day {n} the children played football in the yard until the evening .",
      "On day {n} my parents cooked a quiet dinner and watched the stars .",
  };
  for (const auto* tmpl : kCorrectTemplates) {
    for (int n = 6; n < 11; ++n) {
      const auto x = with_number(tmpl, kNumberWords[n]);
      corpus += x + "\t" + x + "\n";
    }
  }
  fx.corpus_tsv = fx.dir / "corpus.tsv";
  spit(fx.corpus_tsv, corpus);

  // Held-out test set: one fresh sentence per family plus five correct ones.
  std::string test_lines, gold_lines;
  for (const auto& family : families()) {
    const auto x = with_number(family.x_template, "twelve");
    test_lines += x + "\n";
    gold_lines += x + "\t" + corrected_of(family, x) + "\n";
  }
  for (const auto* tmpl : kCorrectTemplates) {
    const auto x = with_number(tmpl, "twelve");
    test_lines += x + "\n";
    gold_lines += x + "\t" + x + "\n";
  }
  {
    const std::string x = "On day twelve everyone stayed inside because of the heavy rain .";
    test_lines += x + "\n";
    gold_lines += x + "\t" + x + "\n";
  }
  fx.test_txt = fx.dir / "test.txt";
  fx.gold_tsv = fx.dir / "gold.tsv";
  spit(fx.test_txt, test_lines);
  spit(fx.gold_tsv, gold_lines);

  json teacher = json::array();
  for (const auto& family : families()) {
    teacher.push_back({{"pattern", family.marker}, {"response", family.explanation}});
  }
  fx.teacher_json = fx.dir / "teacher.json";
  spit(fx.teacher_json, teacher.dump(2));

  json predictor = json::array();
  for (const auto& family : families()) {
    predictor.push_back({{"pattern", "\\[The given text\\][\\s\\S]*" + family.marker},
                         {"response", family.detection}});
  }
  predictor.push_back({{"pattern", "\\[The given text\\]"},
                       {"response", "No grammatical errors were detected in the given text ."}});
  for (const auto& family : families()) {
    predictor.push_back(
        {{"pattern", "<erroneous sentence>([^<]*) " + family.marker +
                         " ([^<]*)</erroneous sentence>\\n<corrected sentence>$"},
         {"response", "$1 " + family.fixed + " $2</corrected sentence>"}});
  }
  predictor.push_back(
      {{"pattern", "<erroneous sentence>([^<]*)</erroneous sentence>\\n<corrected sentence>$"},
       {"response", "$1</corrected sentence>"}});
  fx.predictor_json = fx.dir / "predictor.json";
  spit(fx.predictor_json, predictor.dump(2));

  // Same table without the copy-through rule: unmatched items fail terminally.
  json partial = json::array();
  for (const auto& family : families()) {
    partial.push_back(
        {{"pattern", "<erroneous sentence>([^<]*) " + family.marker +
                         " ([^<]*)</erroneous sentence>\\n<corrected sentence>$"},
         {"response", "$1 " + family.fixed + " $2</corrected sentence>"}});
  }
  fx.partial_predictor_json = fx.dir / "partial_predictor.json";
  spit(fx.partial_predictor_json, partial.dump(2));
  return fx;
}

// --- criteria -----------------------------------------------------------------

bool criterion_f05_formula() {
  struct Point {
    double p, r, f;
  };
  const std::vector<Point> points = {
      {55.00, 53.04, 54.60}, {60.52, 52.55, 58.74}, {22.73, 22.47, 22.68}, {55.67, 51.60, 54.81}};
  for (const auto& point : points) {
    const double f = gee::f_half_score(point.p, point.r);
    if (std::abs(f - point.f) > 0.01) {
      report("f05-formula", false,
             "f(" + std::to_string(point.p) + ", " + std::to_string(point.r) + ") = " +
                 std::to_string(f));
      return false;
    }
  }
  report("f05-formula", true, "4 reference operating points within 0.01");
  return true;
}

bool criterion_edit_oracle() {
  std::mt19937 rng(2024);
  static const char* kVocab[] = {"a", "b", "c", "d"};
  std::uniform_int_distribution<int> length(0, 12);
  std::uniform_int_distribution<int> pick(0, 3);
  const auto random_tokens = [&] {
    std::vector<std::string> tokens;
    const int n = length(rng);
    for (int i = 0; i < n; ++i) tokens.push_back(kVocab[pick(rng)]);
    return tokens;
  };

  for (int trial = 0; trial < 1000; ++trial) {
    gee::TokenSequence source{random_tokens(), gee::TokenMode::Whitespace};
    gee::TokenSequence hypothesis{random_tokens(), gee::TokenMode::Whitespace};
    const auto edits = gee::extract_edits(source, hypothesis);

    int cost = 0;
    for (const auto& edit : edits) {
      const int removed = edit.end - edit.start;
      const int added = static_cast<int>(
          gee::tokenize(edit.replacement, gee::TokenMode::Whitespace).tokens.size());
      cost += std::max(removed, added);
    }
    if (cost != oracles::levenshtein_cost(source.tokens, hypothesis.tokens)) {
      report("edit-extraction-oracle", false, "cost mismatch at trial " + std::to_string(trial));
      return false;
    }
    if (gee::apply_edits(source.tokens, edits, gee::TokenMode::Whitespace) != hypothesis.tokens) {
      report("edit-extraction-oracle", false,
             "reconstruction mismatch at trial " + std::to_string(trial));
      return false;
    }
  }
  report("edit-extraction-oracle", true, "1000 random pairs: cost and reconstruction agree");
  return true;
}

bool criterion_retrieval_oracle() {
  std::mt19937 rng(7);
  gee::HashedNgramEmbedder embedder;
  static const char* kWords[] = {"verb",  "noun",  "tense", "plural", "article", "case",
                                 "agree", "order", "comma", "spell",  "clause",  "drop"};
  std::uniform_int_distribution<int> n_entries(1, 1000);
  std::uniform_int_distribution<int> n_words(2, 7);
  std::uniform_int_distribution<int> pick(0, 11);
  const auto random_text = [&] {
    std::string out;
    const int n = n_words(rng);
    for (int i = 0; i < n; ++i) {
      if (i > 0) out += ' ';
      out += kWords[pick(rng)];
    }
    return out;
  };

  for (int trial = 0; trial < 100; ++trial) {
    const int count = n_entries(rng);
    std::vector<gee::DatabaseEntry> entries;
    std::vector<std::vector<float>> vectors;
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> ids;
    for (int i = 0; i < count; ++i) {
      gee::DatabaseEntry entry;
      entry.id = "db:" + std::to_string(i + 1);
      entry.key_text = random_text();
      entry.sample = {entry.id, "in " + std::to_string(i), "out " + std::to_string(i), "en"};
      entry.key_vector = embedder.embed(entry.key_text);
      vectors.push_back(entry.key_vector.values);
      docs.push_back(gee::tokenize(entry.key_text, gee::TokenMode::Whitespace).tokens);
      ids.push_back(entry.id);
      entries.push_back(std::move(entry));
    }
    gee::DatabaseManifest manifest;
    manifest.language = "en";
    manifest.embedder_id = embedder.id();
    const gee::SampleDatabase db(gee::DatabaseKind::Erroneous, std::move(entries), manifest);

    const auto query = random_text();
    const int k = 1 + trial % 10;

    const auto knn = db.knn_query(query, k, embedder);
    const auto expected_knn = oracles::knn_rank(vectors, ids, embedder.embed(query).values, k);
    if (knn.hits.size() != expected_knn.size()) {
      report("retrieval-oracle", false, "knn size mismatch at trial " + std::to_string(trial));
      return false;
    }
    for (std::size_t i = 0; i < expected_knn.size(); ++i) {
      if (knn.hits[i].id != expected_knn[i].id ||
          std::abs(knn.hits[i].score - expected_knn[i].score) > 1e-6) {
        report("retrieval-oracle", false, "knn rank " + std::to_string(i + 1) + " mismatch");
        return false;
      }
    }

    const auto bm = db.bm25_query(query, k);
    const auto expected_bm =
        oracles::bm25_rank(docs, ids, gee::tokenize(query, gee::TokenMode::Whitespace).tokens, k);
    if (bm.hits.size() != expected_bm.size()) {
      report("retrieval-oracle", false, "bm25 size mismatch at trial " + std::to_string(trial));
      return false;
    }
    for (std::size_t i = 0; i < expected_bm.size(); ++i) {
      if (bm.hits[i].id != expected_bm[i].id ||
          std::abs(bm.hits[i].score - expected_bm[i].score) > 1e-9) {
        report("retrieval-oracle", false, "bm25 rank " + std::to_string(i + 1) + " mismatch");
        return false;
      }
    }
  }
  report("retrieval-oracle", true, "100 random databases: kNN and BM25 match full scans");
  return true;
}

bool criterion_end_to_end(const fs::path& scratch) {
  const auto run_once = [&](const fs::path& dir) -> std::string {
    fs::create_directories(dir);
    if (run_cli(dir,
                "build-db --corpus ../fixtures/corpus.tsv --lang en --name syn --db db "
                "--teacher mock:regex:../fixtures/teacher.json --cache-dir cache_build --jobs 2",
                "build") != 0) {
      return "build-db exited non-zero";
    }
    if (run_cli(dir,
                "predict --db db --test ../fixtures/test.txt --out out --strategy explanation "
                "--predictor mock:regex:../fixtures/predictor.json --cache-dir cache_predict "
                "--jobs 2",
                "predict") != 0) {
      return "predict exited non-zero";
    }
    if (run_cli(dir,
                "evaluate --pred out/predictions.jsonl --gold ../fixtures/gold.tsv "
                "--gold-format parallel --report report.json",
                "evaluate") != 0) {
      return "evaluate exited non-zero";
    }
    return "";
  };

  const auto run1 = scratch / "run1";
  const auto run2 = scratch / "run2";
  for (const auto& dir : {run1, run2}) {
    const auto error = run_once(dir);
    if (!error.empty()) {
      report("end-to-end-determinism", false, error + " in " + dir.filename().string());
      return false;
    }
  }

  std::string why;
  for (const char* artifact :
       {"db/erroneous/entries.jsonl", "db/erroneous/manifest.json", "db/correct/entries.jsonl",
        "db/correct/manifest.json", "out/predictions.jsonl", "out/run.json", "report.json"}) {
    if (!same_bytes(run1 / artifact, run2 / artifact, &why)) {
      report("end-to-end-determinism", false, why);
      return false;
    }
  }

  // Query routing provenance: erroneous query == detection text, correct
  // query == source, for every item.
  std::istringstream lines(slurp(run1 / "out/predictions.jsonl"));
  std::string line;
  std::size_t checked = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto record = json::parse(line);
    if (!record.contains("detection_text")) {
      report("end-to-end-determinism", false, "prediction record without detection text");
      return false;
    }
    if (record.at("queries").at("erroneous") != record.at("detection_text") ||
        record.at("queries").at("correct") != record.at("source")) {
      report("end-to-end-determinism", false,
             "query routing violated at item " + std::to_string(record.at("index").get<int>()));
      return false;
    }
    ++checked;
  }
  if (checked != 10) {
    report("end-to-end-determinism", false, "expected 10 prediction records");
    return false;
  }

  // The family rules fix every erroneous item, so the run scores perfectly.
  const auto report_json = json::parse(slurp(run1 / "report.json"));
  if (report_json.at("f0_5").get<double>() != 1.0) {
    report("end-to-end-determinism", false, "synthetic run did not score F0.5 = 1.0");
    return false;
  }

  report("end-to-end-determinism", true,
         "build-db -> predict -> evaluate byte-identical across runs; routing verified");
  return true;
}

bool criterion_prompt_invariants() {
  std::mt19937 rng(99);
  gee::HashedNgramEmbedder embedder;
  static const char* kWords[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_int_distribution<int> db_size(5, 12);
  const auto sentence = [&](const std::string& tag, int i) {
    std::string out = tag + " " + std::to_string(i);
    for (int w = 0; w < 4; ++w) out += std::string(" ") + kWords[pick(rng)];
    return out;
  };

  for (int trial = 0; trial < 200; ++trial) {
    const int n = db_size(rng);
    std::vector<gee::DatabaseEntry> err_entries, corr_entries;
    for (int i = 0; i < n; ++i) {
      gee::DatabaseEntry entry;
      entry.id = "e:" + std::to_string(i + 1);
      entry.sample = {entry.id, sentence("bad", i), sentence("fix", i), "en"};
      entry.key_text = "explanation " + sentence("note", i);
      entry.key_vector = embedder.embed(entry.key_text);
      err_entries.push_back(entry);

      gee::DatabaseEntry corr;
      corr.id = "c:" + std::to_string(i + 1);
      corr.sample = {corr.id, sentence("good", i), sentence("good", i), "en"};
      corr.key_text = corr.sample.input_text;
      corr.key_vector = embedder.embed(corr.key_text);
      corr_entries.push_back(corr);
    }
    gee::DatabaseManifest manifest;
    manifest.language = "en";
    manifest.embedder_id = embedder.id();
    const gee::SampleDatabase err_db(gee::DatabaseKind::Erroneous, std::move(err_entries), manifest);
    const gee::SampleDatabase corr_db(gee::DatabaseKind::Correct, std::move(corr_entries), manifest);

    gee::RunConfig config;
    config.strategy = trial % 2 == 0 ? gee::Strategy::Semantic : gee::Strategy::Random;
    config.seed = static_cast<std::uint64_t>(trial);
    const auto source = sentence("test", trial);
    const auto demos = gee::retrieve_demonstrations(err_db, corr_db, source, std::nullopt, config,
                                                    embedder);
    if (demos.erroneous.size() != 4 || demos.correct.size() != 4) {
      report("prompt-invariants", false, "retrieval did not fill 4+4 demos");
      return false;
    }
    const auto prompt = gee::assemble_prompt(gee::PromptCatalog::builtin(), demos, source, config);

    const auto count = [&](const std::string& needle) {
      std::size_t occurrences = 0, pos = 0;
      while ((pos = prompt.find(needle, pos)) != std::string::npos) {
        ++occurrences;
        pos += needle.size();
      }
      return occurrences;
    };
    if (count("\n<erroneous sentence>") != 9 || count("</erroneous sentence>\n") != 9 ||
        count("\n<corrected sentence>") != 9 || count("</corrected sentence>\n") != 8) {
      report("prompt-invariants", false, "stanza tag counts wrong at trial " + std::to_string(trial));
      return false;
    }
    if (prompt.substr(prompt.size() - 20) != "<corrected sentence>") {
      report("prompt-invariants", false, "prompt does not end with an open output tag");
      return false;
    }
    // Erroneous stanzas strictly precede correct stanzas, then the test one.
    std::size_t last_err = 0;
    for (const auto& demo : demos.erroneous) {
      const auto at = prompt.find("\n<erroneous sentence>" + demo.input_text + "<");
      if (at == std::string::npos) {
        report("prompt-invariants", false, "missing erroneous stanza");
        return false;
      }
      last_err = std::max(last_err, at);
    }
    std::size_t first_corr = prompt.size(), last_corr = 0;
    for (const auto& demo : demos.correct) {
      const auto at = prompt.find("\n<erroneous sentence>" + demo.input_text + "<");
      if (at == std::string::npos) {
        report("prompt-invariants", false, "missing correct stanza");
        return false;
      }
      first_corr = std::min(first_corr, at);
      last_corr = std::max(last_corr, at);
    }
    const auto test_at = prompt.find("\n<erroneous sentence>" + source + "<");
    if (!(last_err < first_corr && last_corr < test_at)) {
      report("prompt-invariants", false, "stanza ordering violated at trial " + std::to_string(trial));
      return false;
    }
  }
  report("prompt-invariants", true, "200 assembled prompts: 8 demos, ordering and nesting hold");
  return true;
}

bool criterion_ablation_mechanics(const fs::path& scratch) {
  // Run the sweep twice in sibling directories; artifacts must match bytewise.
  for (const char* tag : {"ablate_a", "ablate_b"}) {
    const auto run_dir = scratch / tag;
    fs::create_directories(run_dir);
    if (run_cli(run_dir,
                "build-db --corpus ../fixtures/corpus.tsv --lang en --name syn --db db "
                "--teacher mock:regex:../fixtures/teacher.json --jobs 2",
                "build") != 0) {
      report("ablation-mechanics", false, "build-db exited non-zero");
      return false;
    }
    if (run_cli(run_dir,
                "ablate --db db --test ../fixtures/test.txt --gold ../fixtures/gold.tsv "
                "--gold-format parallel --out sweep --strategy semantic "
                "--predictor mock:regex:../fixtures/predictor.json --total 8 --jobs 2",
                "ablate") != 0) {
      report("ablation-mechanics", false, "ablate exited non-zero");
      return false;
    }
  }
  const auto dir = scratch / "ablate_a";
  std::string why;
  for (const char* artifact :
       {"sweep/sweep.tsv", "sweep/summary.json", "sweep/k0/predictions.jsonl", "sweep/k0/run.json",
        "sweep/k8/predictions.jsonl"}) {
    if (!same_bytes(dir / artifact, scratch / "ablate_b" / artifact, &why)) {
      report("ablation-mechanics", false, why);
      return false;
    }
  }

  const auto tsv = slurp(dir / "sweep/sweep.tsv");
  std::istringstream tsv_lines(tsv);
  std::string line;
  std::getline(tsv_lines, line);
  if (line != "k_C\tP\tR\tF0.5") {
    report("ablation-mechanics", false, "unexpected sweep header: " + line);
    return false;
  }
  int rows = 0;
  while (std::getline(tsv_lines, line)) {
    if (!line.empty()) ++rows;
  }
  if (rows != 9) {
    report("ablation-mechanics", false, "expected 9 sweep rows, got " + std::to_string(rows));
    return false;
  }
  const auto summary = json::parse(slurp(dir / "sweep/summary.json"));
  for (const auto& row : summary.at("rows")) {
    if (row.at("k_correct").get<int>() + row.at("k_erroneous").get<int>() != 8) {
      report("ablation-mechanics", false, "a sweep row does not sum to 8");
      return false;
    }
  }
  const auto lineage = summary.at("lineage_id").get<std::string>();
  for (int k = 0; k <= 8; ++k) {
    const auto run = json::parse(slurp(dir / ("sweep/k" + std::to_string(k)) / "run.json"));
    if (run.at("lineage_id").get<std::string>() != lineage) {
      report("ablation-mechanics", false, "sweep rows do not share one lineage id");
      return false;
    }
  }

  // Golden prompt layouts for the in-context explanation modes, observed
  // through an echoing predictor (the raw response is the assembled prompt).
  const auto golden_dir = fs::path(GEE_SOURCE_DIR) / "tests/golden";
  spit(dir / "tiny/corpus.tsv",
       "The small boy go to school every day with his bag .\t"
       "The small boy goes to school every day with his bag .\n"
       "The weather is nice today and we walk in the park .\t"
       "The weather is nice today and we walk in the park .\n");
  spit(dir / "tiny/test.txt", "The little girl go to the market every single day alone .\n");
  const json echo_rules = {
      {{"pattern", "\\[The given text\\]"},
       {"response", "Detected: verb agreement issue in the given text."}},
      {{"pattern", "^[\\s\\S]+$"}, {"response", "$&"}},
  };
  spit(dir / "tiny/echo_predictor.json", echo_rules.dump(2));
  if (run_cli(dir / "tiny",
              "build-db --corpus corpus.tsv --lang en --name tiny --db db "
              "--teacher \"mock:fixed:Verb agreement: go should be goes after a singular "
              "subject.\" --min-tokens 1",
              "tinybuild") != 0) {
    report("ablation-mechanics", false, "tiny build-db exited non-zero");
    return false;
  }
  for (const std::string mode : {"pre", "post"}) {
    if (run_cli(dir / "tiny",
                "predict --db db --test test.txt --out out_" + mode +
                    " --strategy explanation --explanation-mode " + mode +
                    " --k-e 1 --k-c 1 --predictor mock:regex:echo_predictor.json",
                "tiny_" + mode) != 0) {
      report("ablation-mechanics", false, "tiny predict (" + mode + ") exited non-zero");
      return false;
    }
    const auto record =
        json::parse(slurp(dir / "tiny" / ("out_" + mode) / "predictions.jsonl"));
    const auto prompt = record.at("raw_response").get<std::string>();
    const auto golden = slurp(golden_dir / ("prompt_" + mode + ".golden"));
    if (prompt != golden) {
      spit(dir / "tiny" / ("prompt_" + mode + ".actual"), prompt);
      report("ablation-mechanics", false,
             mode + " layout differs from golden (see tiny/prompt_" + mode + ".actual)");
      return false;
    }
  }

  report("ablation-mechanics", true, "9 sweep rows sum to 8; pre/post layouts match goldens");
  return true;
}

bool criterion_scale_statement() {
  const auto readme = slurp(fs::path(GEE_SOURCE_DIR) / "README.md");
  const bool has_recipe = readme.find("## Running against real backends") != std::string::npos;
  const bool has_statement = readme.find("mock backends") != std::string::npos;
  report("scale-disclaimer", has_recipe && has_statement,
         "benchmark-scale scores need real LLM backends and licensed corpora; this suite "
         "validates formulas, oracles, invariants, and deterministic mechanics offline "
         "(recipe documented in README)");
  return has_recipe && has_statement;
}

bool integration_exit_statuses(const fs::path& scratch) {
  const auto dir = scratch / "exit_codes";
  fs::create_directories(dir);
  if (run_cli(dir,
              "build-db --corpus ../fixtures/corpus.tsv --lang en --name syn --db db "
              "--teacher mock:regex:../fixtures/teacher.json --jobs 2",
              "build") != 0) {
    report("integration-exit-statuses", false, "setup build failed");
    return false;
  }

  const int usage = run_cli(dir, "predict --db db", "usage");  // missing required flags
  if (usage != 1) {
    report("integration-exit-statuses", false, "usage error returned " + std::to_string(usage));
    return false;
  }

  const int ok = run_cli(dir,
                         "predict --db db --test ../fixtures/test.txt --out out "
                         "--strategy semantic --predictor mock:regex:../fixtures/predictor.json",
                         "predict_ok");
  if (ok != 0) {
    report("integration-exit-statuses", false, "clean predict returned " + std::to_string(ok));
    return false;
  }

  const int overwrite = run_cli(dir,
                                "predict --db db --test ../fixtures/test.txt --out out "
                                "--strategy semantic "
                                "--predictor mock:regex:../fixtures/predictor.json",
                                "predict_overwrite");
  if (overwrite != 1) {
    report("integration-exit-statuses", false,
           "overwrite without --force returned " + std::to_string(overwrite));
    return false;
  }

  const int partial = run_cli(dir,
                              "predict --db db --test ../fixtures/test.txt --out out_partial "
                              "--strategy semantic "
                              "--predictor mock:regex:../fixtures/partial_predictor.json",
                              "predict_partial");
  if (partial != 2) {
    report("integration-exit-statuses", false,
           "partial failure returned " + std::to_string(partial));
    return false;
  }

  report("integration-exit-statuses", true, "0 on success, 1 on usage/overwrite, 2 on partial");
  return true;
}

// Config precedence is file < flags < environment: GEE_CACHE_DIR must win
// over --cache-dir.
bool integration_env_precedence(const fs::path& scratch) {
  const auto dir = scratch / "env_precedence";
  fs::create_directories(dir);
  const std::string command =
      "cd '" + dir.string() + "' && SOURCE_DATE_EPOCH=1700000000 GEE_CACHE_DIR=env_cache '" +
      GEE_CLI_PATH
      "' build-db --corpus ../fixtures/corpus.tsv --lang en --name syn --db db "
      "--teacher mock:regex:../fixtures/teacher.json --cache-dir flag_cache "
      ">build.out 2>build.err";
  const int status = std::system(command.c_str());
  const int code = status == -1 ? -1 : (WIFEXITED(status) ? WEXITSTATUS(status) : -1);
  if (code != 0) {
    report("integration-env-precedence", false, "build-db exited " + std::to_string(code));
    return false;
  }
  const bool env_used = fs::exists(dir / "env_cache") && !fs::is_empty(dir / "env_cache");
  const bool flag_ignored = !fs::exists(dir / "flag_cache");
  report("integration-env-precedence", env_used && flag_ignored,
         "GEE_CACHE_DIR overrides --cache-dir");
  return env_used && flag_ignored;
}

}  // namespace

int main() {
  const auto scratch =
      fs::temp_directory_path() / ("gee_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  write_fixtures(scratch);

  const auto started = std::chrono::steady_clock::now();
  criterion_f05_formula();
  criterion_edit_oracle();
  criterion_retrieval_oracle();
  criterion_end_to_end(scratch);
  criterion_prompt_invariants();
  criterion_ablation_mechanics(scratch);
  criterion_scale_statement();
  integration_exit_statuses(scratch);
  integration_env_precedence(scratch);
  const auto elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::cout << (g_failed == 0 ? "all criteria passed" : std::to_string(g_failed) + " criteria FAILED")
            << " in " << elapsed << "s\n";
  if (g_failed == 0) fs::remove_all(scratch);
  return g_failed == 0 ? 0 : 1;
}
