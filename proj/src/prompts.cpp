#include "gee/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gee {

namespace {

constexpr char kDetectionBody[] =
    R"(You are tasked with performing a comprehensive grammatical error analysis on the following text, which may contain errors in various languages. Your job is to identify any grammatical, syntactic, punctuation, or spelling errors in the text. For each detected error, follow these steps:

Identify the Error: List each error separately.
Correction: Suggest the appropriate correction for each identified error.
Explanation: Provide a brief explanation for why the correction is necessary. This should include references to specific grammar rules, conventions, or language-specific nuances (e.g., verb conjugation, article-noun agreement, preposition use, punctuation rules).
For spelling errors, offer an explanation if the mistake could arise from common language-specific confusions (e.g., homophones, loanwords).
For punctuation issues, explain the relevant punctuation rules (e.g., comma placement in subordinate clauses, quotation marks, etc.).
For syntax or word order issues, explain how sentence structure works in the language and why the original sentence does not follow the norm.
Minimal Impact on Meaning: Ensure that the corrections you propose do not alter the original meaning of the sentence. The goal is to preserve the intent of the writer while correcting errors.
When explaining each error, keep in mind that the explanations should be clear and concise but still detailed enough to be educational. Whenever possible, reference grammatical terms (e.g., agreement, tense, case, gender, aspect) relevant to the error.

Important Notes:

If the text is multilingual, address each language's grammar rules separately.
Your explanations should cater to a general audience, meaning that while your responses can be technical, they should still be easily understood by someone with a basic understanding of grammar.
Now, perform this process for the following text:

[The given text]:
{source}

[Corrections made and the brief reasons for the errors]:)";

constexpr char kExplanationBody[] =
    R"(You are tasked with performing a comprehensive grammatical error analysis on the following text, which may contain errors in various languages. Your job is to identify any grammatical, syntactic, punctuation, or spelling errors in the text. For each detected error, follow these steps:

Identify the Error: List each error separately.
Correction: Suggest the appropriate correction for each identified error.
Explanation: Provide a brief explanation for why the correction is necessary. This should include references to specific grammar rules, conventions, or language-specific nuances (e.g., verb conjugation, article-noun agreement, preposition use, punctuation rules).
For spelling errors, offer an explanation if the mistake could arise from common language-specific confusions (e.g., homophones, loanwords).
For punctuation issues, explain the relevant punctuation rules (e.g., comma placement in subordinate clauses, quotation marks, etc.).
For syntax or word order issues, explain how sentence structure works in the language and why the original sentence does not follow the norm.
Minimal Impact on Meaning: Ensure that the corrections you propose do not alter the original meaning of the sentence. The goal is to preserve the intent of the writer while correcting errors.
When explaining each error, keep in mind that the explanations should be clear and concise but still detailed enough to be educational. Whenever possible, reference grammatical terms (e.g., agreement, tense, case, gender, aspect) relevant to the error.

Important Notes:

If the text is multilingual, address each language's grammar rules separately.
Your explanations should cater to a general audience, meaning that while your responses can be technical, they should still be easily understood by someone with a basic understanding of grammar.
Now, perform this process for the following text:

[The given text]:
{text}

And we will give you the corrected version of the given text below. Your analysis of grammatical errors should lead to the given text being corrected to this specific version.
[The corrected version]:
{label}

[Corrections made and the brief reasons for the errors]:)";

constexpr char kExplanationEditsBody[] =
    R"(You, a language expert, can briefly explain how to judge a sentence is grammatically correct and why some corrections are essential.
For the given text:
{text}
Corrected text:
{label}

{edits}
Please explain briefly why you made these corrections.
Your Explanation:)";

constexpr char kDetectionShortBody[] =
    R"(Your task is to detect grammatical errors in the given text and provide corrections along with explanations based on the relevant grammar rules. For each error found, specify the type of error (e.g., subject-verb agreement, tense inconsistency) and explain why it is incorrect. Then provide the correct version of the sentence and briefly explain the grammar rule that applies.

Please follow this structure for your response:

[The given text]:
{source}

[Corrections made and the brief reasons for the errors]:)";

constexpr char kFewShotBody[] =
    R"(You are an language expert who is responsible for grammatical, lexical and orthographic error corrections given an input sentence. Your job is to fix grammatical mistakes, awkward phrases, spelling errors, etc. following standard written usage conventions, but your corrections must be conservative. Please keep the original sentence (words, phrases, and structure) as much as possible. The ultimate goal of this task is to make the given sentence sound natural to native speakers without making unnecessary changes. Corrections are not required when the sentence is already grammatical and sounds natural.
There is an erroneous sentence between `<erroneous sentence>` and `</erroneous sentence>`. Then grammatical errors in the erroneous sentence will be corrected. The corrected version will be between `<corrected sentence>` and `</corrected sentence>`.)";

const std::set<std::string> kKnownPlaceholders = {"text", "label", "source", "edits"};

std::set<std::string> infer_placeholders(const std::string& body) {
  std::set<std::string> found;
  std::size_t pos = 0;
  while ((pos = body.find('{', pos)) != std::string::npos) {
    const auto close = body.find('}', pos + 1);
    if (close == std::string::npos) break;
    const std::string name = body.substr(pos + 1, close - pos - 1);
    if (kKnownPlaceholders.count(name)) found.insert(name);
    pos = close + 1;
  }
  return found;
}

}  // namespace

std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& bindings) {
  for (const auto& required : tmpl.required_placeholders) {
    if (!bindings.count(required)) {
      throw std::runtime_error("unbound placeholder: " + required);
    }
  }
  std::string out;
  out.reserve(tmpl.body.size());
  std::size_t pos = 0;
  while (pos < tmpl.body.size()) {
    const auto open = tmpl.body.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl.body, pos, std::string::npos);
      break;
    }
    out.append(tmpl.body, pos, open - pos);
    const auto close = tmpl.body.find('}', open + 1);
    if (close == std::string::npos) {
      out.append(tmpl.body, open, std::string::npos);
      break;
    }
    const std::string name = tmpl.body.substr(open + 1, close - open - 1);
    const auto it = bindings.find(name);
    if (it != bindings.end()) {
      out += it->second;
    } else {
      out.append(tmpl.body, open, close - open + 1);  // not bound: left as-is
    }
    pos = close + 1;
  }
  return out;
}

PromptCatalog PromptCatalog::builtin() {
  PromptCatalog catalog;
  catalog.add({kExplanationTemplate, kExplanationBody, {"text", "label"}});
  catalog.add({kExplanationEditsTemplate, kExplanationEditsBody, {"text", "label", "edits"}});
  catalog.add({kDetectionDetailedTemplate, kDetectionBody, {"source"}});
  catalog.add({kDetectionShortTemplate, kDetectionShortBody, {"source"}});
  catalog.add({kFewShotTemplate, kFewShotBody, {}});
  return catalog;
}

void PromptCatalog::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("prompt directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) throw std::runtime_error("cannot read prompt file: " + entry.path().string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string body = buffer.str();
    if (!body.empty() && body.back() == '\n') body.pop_back();
    PromptTemplate tmpl;
    tmpl.name = entry.path().stem().string();
    tmpl.body = std::move(body);
    tmpl.required_placeholders = infer_placeholders(tmpl.body);
    add(std::move(tmpl));
  }
}

void PromptCatalog::add(PromptTemplate tmpl) {
  auto name = tmpl.name;
  templates_[std::move(name)] = std::move(tmpl);
}

const PromptTemplate& PromptCatalog::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw std::runtime_error("unknown prompt template: " + name);
  return it->second;
}

bool PromptCatalog::contains(const std::string& name) const { return templates_.count(name) > 0; }

std::vector<std::string> PromptCatalog::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& [name, tmpl] : templates_) out.push_back(name);
  return out;
}

}  // namespace gee
