#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdlib>
#include <fstream>
#include <memory>

#include "gee/backend.hpp"
#include "gee/corpus.hpp"
#include "gee/database.hpp"
#include "gee/embedding.hpp"
#include "gee/eval.hpp"
#include "gee/pipeline.hpp"
#include "gee/prompts.hpp"
#include "gee/text.hpp"

namespace py = pybind11;

namespace {

gee::RemoteConfig remote_from_env() {
  gee::RemoteConfig config;
  if (const char* base = std::getenv("GEE_API_BASE")) config.base_url = base;
  if (const char* key = std::getenv("GEE_API_KEY")) config.api_key = key;
  return config;
}

gee::TokenMode mode_of(const std::string& name) { return gee::token_mode_from_name(name); }

/// Owning wrapper so Python holds the database and its query embedder
/// together.
struct PyDatabase {
  std::shared_ptr<gee::SampleDatabase> db;
  std::shared_ptr<gee::Embedder> embedder;

  py::list query_to_list(const gee::QueryResult& result) const {
    py::list out;
    for (const auto& hit : result.hits) {
      py::dict item;
      item["id"] = hit.id;
      item["key_text"] = hit.key_text;
      item["input_text"] = hit.sample.input_text;
      item["corrected_text"] = hit.sample.corrected_text;
      item["score"] = hit.score;
      item["rank"] = hit.rank;
      out.append(std::move(item));
    }
    return out;
  }
};

py::dict report_to_dict(const gee::ScoreReport& report) {
  py::dict out;
  out["tp"] = report.tp;
  out["fp"] = report.fp;
  out["fn"] = report.fn;
  out["precision"] = report.precision;
  out["recall"] = report.recall;
  out["f0_5"] = report.f_half;
  out["n_sentences"] = report.n_sentences;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Explanation-indexed demonstration retrieval for few-shot GEC";

  py::class_<gee::Sample>(m, "Sample")
      .def(py::init([](std::string id, std::string input_text, std::string corrected_text,
                       std::string language) {
             return gee::Sample{std::move(id), std::move(input_text), std::move(corrected_text),
                                std::move(language)};
           }),
           py::arg("id"), py::arg("input_text"), py::arg("corrected_text"),
           py::arg("language") = "en")
      .def_readwrite("id", &gee::Sample::id)
      .def_readwrite("input_text", &gee::Sample::input_text)
      .def_readwrite("corrected_text", &gee::Sample::corrected_text)
      .def_readwrite("language", &gee::Sample::language)
      .def("__repr__", [](const gee::Sample& sample) {
        return "Sample(id=" + sample.id + ")";
      });

  py::class_<gee::EditSpan>(m, "EditSpan")
      .def(py::init([](int start, int end, std::string replacement) {
             return gee::EditSpan{start, end, std::move(replacement)};
           }),
           py::arg("start"), py::arg("end"), py::arg("replacement"))
      .def_readwrite("start", &gee::EditSpan::start)
      .def_readwrite("end", &gee::EditSpan::end)
      .def_readwrite("replacement", &gee::EditSpan::replacement)
      .def("is_insertion", &gee::EditSpan::is_insertion)
      .def("__eq__", [](const gee::EditSpan& a, const gee::EditSpan& b) { return a == b; })
      .def("__repr__", [](const gee::EditSpan& edit) {
        return "EditSpan(" + std::to_string(edit.start) + ", " + std::to_string(edit.end) +
               ", \"" + edit.replacement + "\")";
      });

  m.def(
      "tokenize",
      [](const std::string& text, const std::string& mode) {
        return gee::tokenize(text, mode_of(mode)).tokens;
      },
      py::arg("text"), py::arg("mode") = "whitespace");
  m.def("normalize_text", &gee::normalize_text, py::arg("text"));
  m.def("token_mode_for_language",
        [](const std::string& language) {
          return gee::token_mode_name(gee::token_mode_for_language(language));
        },
        py::arg("language"));

  m.def(
      "parse_parallel_file",
      [](const std::string& path, const std::string& format, const std::string& corpus_name,
         const std::string& language) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        const auto fmt = format == "jsonl" ? gee::ParallelFormat::Jsonl : gee::ParallelFormat::Tsv;
        return gee::parse_parallel(in, fmt, corpus_name, language);
      },
      py::arg("path"), py::arg("format") = "tsv", py::arg("corpus_name") = "corpus",
      py::arg("language") = "en");

  m.def(
      "filter_samples",
      [](const std::vector<gee::Sample>& samples, int min_tokens, int max_tokens, std::size_t cap,
         std::uint64_t seed) {
        return gee::filter_samples(samples, {min_tokens, max_tokens, cap, seed});
      },
      py::arg("samples"), py::arg("min_tokens") = 10, py::arg("max_tokens") = 60,
      py::arg("cap") = 25000, py::arg("seed") = 0);

  m.def(
      "split_by_correctness",
      [](const std::vector<gee::Sample>& samples) {
        auto split = gee::split_by_correctness(samples);
        return py::make_tuple(std::move(split.erroneous), std::move(split.correct));
      },
      py::arg("samples"));

  m.def(
      "extract_edits",
      [](const std::string& source, const std::string& hypothesis, const std::string& mode) {
        const auto token_mode = mode_of(mode);
        return gee::extract_edits(gee::tokenize(source, token_mode),
                                  gee::tokenize(hypothesis, token_mode));
      },
      py::arg("source"), py::arg("hypothesis"), py::arg("mode") = "whitespace");

  m.def(
      "apply_edits",
      [](const std::vector<std::string>& tokens, const std::vector<gee::EditSpan>& edits,
         const std::string& mode) { return gee::apply_edits(tokens, edits, mode_of(mode)); },
      py::arg("tokens"), py::arg("edits"), py::arg("mode") = "whitespace");

  m.def("f_half_score", &gee::f_half_score, py::arg("precision"), py::arg("recall"));

  m.def(
      "evaluate_parallel",
      [](const std::vector<std::string>& sources, const std::vector<std::string>& hypotheses,
         const std::vector<std::vector<std::string>>& reference_sets, const std::string& mode) {
        const auto result =
            gee::evaluate_parallel(sources, hypotheses, reference_sets, mode_of(mode));
        return report_to_dict(result.report);
      },
      py::arg("sources"), py::arg("hypotheses"), py::arg("reference_sets"),
      py::arg("mode") = "whitespace");

  m.def(
      "embed",
      [](const std::string& text) {
        gee::HashedNgramEmbedder embedder;
        return embedder.embed(text).values;
      },
      py::arg("text"), "Offline hashed character-n-gram embedding (512 dims, unit norm).");

  m.def(
      "render_prompt",
      [](const std::string& template_name, const std::map<std::string, std::string>& bindings) {
        const auto catalog = gee::PromptCatalog::builtin();
        return gee::render_template(catalog.get(template_name), bindings);
      },
      py::arg("template_name"), py::arg("bindings"));
  m.def("prompt_names", [] { return gee::PromptCatalog::builtin().names(); });

  py::class_<PyDatabase>(m, "Database")
      .def_static(
          "load",
          [](const std::string& path) {
            PyDatabase wrapper;
            wrapper.db = std::make_shared<gee::SampleDatabase>(gee::SampleDatabase::load(path));
            wrapper.embedder = std::make_shared<gee::HashedNgramEmbedder>();
            return wrapper;
          },
          py::arg("path"))
      .def("__len__", [](const PyDatabase& self) { return self.db->size(); })
      .def_property_readonly("kind",
                             [](const PyDatabase& self) {
                               return gee::database_kind_name(self.db->kind());
                             })
      .def_property_readonly("language",
                             [](const PyDatabase& self) { return self.db->manifest().language; })
      .def(
          "knn_query",
          [](const PyDatabase& self, const std::string& query, int k) {
            return self.query_to_list(self.db->knn_query(query, k, *self.embedder));
          },
          py::arg("query"), py::arg("k") = 4)
      .def(
          "bm25_query",
          [](const PyDatabase& self, const std::string& query, int k) {
            return self.query_to_list(self.db->bm25_query(query, k));
          },
          py::arg("query"), py::arg("k") = 4)
      .def(
          "random_select",
          [](const PyDatabase& self, int k, std::uint64_t seed) {
            return self.query_to_list(self.db->random_select(k, seed));
          },
          py::arg("k") = 4, py::arg("seed") = 0)
      .def(
          "persist",
          [](const PyDatabase& self, const std::string& path) { self.db->persist(path); },
          py::arg("path"));

  m.def(
      "build_database",
      [](const std::vector<gee::Sample>& samples, const std::string& teacher_spec,
         const std::string& language, const std::string& corpus_name, bool use_edits_template,
         unsigned jobs) {
        const auto remote = remote_from_env();
        auto teacher = gee::make_backend(teacher_spec, remote);
        auto embedder = std::make_shared<gee::HashedNgramEmbedder>();
        gee::BuildConfig config;
        config.language = language;
        config.corpus_name = corpus_name;
        config.teacher_model = teacher.model_name;
        config.use_edits_template = use_edits_template;
        config.jobs = jobs;
        auto output = gee::build_database(samples, *teacher.backend, nullptr, *embedder,
                                          gee::PromptCatalog::builtin(), config);
        PyDatabase err{std::make_shared<gee::SampleDatabase>(std::move(output.erroneous)), embedder};
        PyDatabase corr{std::make_shared<gee::SampleDatabase>(std::move(output.correct)), embedder};
        py::dict rep;
        rep["explained"] = output.report.explained;
        rep["failed"] = output.report.failed;
        rep["erroneous_count"] = output.report.erroneous_count;
        rep["correct_count"] = output.report.correct_count;
        rep["failures"] = output.report.failures;
        return py::make_tuple(std::move(err), std::move(corr), std::move(rep));
      },
      py::arg("samples"), py::arg("teacher") = "mock:echo", py::arg("language") = "en",
      py::arg("corpus_name") = "corpus", py::arg("use_edits_template") = false,
      py::arg("jobs") = 0);

  m.def(
      "predict_batch",
      [](const PyDatabase& err_db, const PyDatabase& corr_db,
         const std::vector<std::string>& sources, const std::string& predictor_spec,
         const std::string& strategy, int k_e, int k_c, std::uint64_t seed,
         const std::string& explanation_mode, const std::string& detection_template,
         unsigned jobs) {
        const auto remote = remote_from_env();
        auto predictor = gee::make_backend(predictor_spec, remote);
        gee::RunConfig config;
        config.strategy = gee::strategy_from_name(strategy);
        config.k_erroneous = k_e;
        config.k_correct = k_c;
        config.seed = seed;
        config.explanation_mode = gee::explanation_mode_from_name(explanation_mode);
        config.detection_template = detection_template;
        config.predictor_model = predictor.model_name;
        config.jobs = jobs;
        const auto output =
            gee::run_batch(sources, *err_db.db, *corr_db.db, config, *predictor.backend, nullptr,
                           *err_db.embedder, gee::PromptCatalog::builtin());
        py::list records;
        for (const auto& prediction : output.predictions) {
          py::dict record;
          record["index"] = prediction.index;
          record["source"] = prediction.source;
          record["hypothesis"] = prediction.hypothesis;
          record["flags"] = prediction.flags;
          py::dict queries;
          queries["erroneous"] = prediction.demos.erroneous_query;
          queries["correct"] = prediction.demos.correct_query;
          record["queries"] = std::move(queries);
          if (prediction.detection.has_value()) {
            record["detection_text"] = prediction.detection->initial_explanation;
          }
          records.append(std::move(record));
        }
        return records;
      },
      py::arg("err_db"), py::arg("corr_db"), py::arg("sources"),
      py::arg("predictor") = "mock:echo", py::arg("strategy") = "semantic", py::arg("k_e") = 4,
      py::arg("k_c") = 4, py::arg("seed") = 0, py::arg("explanation_mode") = "none",
      py::arg("detection_template") = "detection-detailed", py::arg("jobs") = 0);

#ifdef GEE_VERSION
  m.attr("__version__") = GEE_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
