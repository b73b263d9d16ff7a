#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace gee {

struct PromptTemplate {
  std::string name;
  std::string body;  // named {placeholder} spans
  std::set<std::string> required_placeholders;
};

/// Replaces every `{name}` with its binding. Bindings not referenced by the
/// body are ignored; a required placeholder without a binding is an error.
std::string render_template(const PromptTemplate& tmpl,
                            const std::map<std::string, std::string>& bindings);

// Canonical template names.
inline constexpr char kExplanationTemplate[] = "explanation";
inline constexpr char kExplanationEditsTemplate[] = "explanation-using-edits";
inline constexpr char kDetectionDetailedTemplate[] = "detection-detailed";
inline constexpr char kDetectionShortTemplate[] = "detection-short";
inline constexpr char kFewShotTemplate[] = "few-shot";

class PromptCatalog {
 public:
  /// The five built-in templates.
  static PromptCatalog builtin();

  /// Loads `*.txt` files from a directory (name = filename stem), replacing
  /// any built-in of the same name. Required placeholders are inferred from
  /// the body.
  void load_directory(const std::filesystem::path& dir);

  void add(PromptTemplate tmpl);
  const PromptTemplate& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace gee
