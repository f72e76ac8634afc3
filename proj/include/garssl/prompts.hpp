#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "garssl/error.hpp"
#include "garssl/schemas.hpp"
#include "garssl/stage.hpp"

namespace garssl {

/// Context bindings for template rendering. Values are pre-serialized
/// strings in the same canonical forms the schemas module parses.
using PromptContext = std::map<std::string, std::string>;

extern const std::array<const char*, 4> kPromptVariants;  // ours, method1, method2, method3

/// One template set (all six stage templates) for a prompt variant.
/// Templates are compiled in; a directory of <stage>.txt files can override
/// any of them for prompt experiments.
class PromptLibrary {
 public:
  static PromptLibrary builtin(const std::string& variant = "ours");
  static bool known_variant(const std::string& variant);

  /// Replaces templates for which `dir/<stage name>.txt` exists.
  Status apply_overrides(const std::filesystem::path& dir);

  const std::string& text(StageTag stage) const;

  /// Placeholder names appearing in the stage's template, in order of first
  /// appearance.
  std::vector<std::string> placeholders(StageTag stage) const;

  /// Substitutes every placeholder. Unbound placeholder -> MissingBinding;
  /// in strict mode an unused binding -> ExtraBinding (harness bug, not a
  /// model issue).
  Result<std::string> render(StageTag stage, const PromptContext& ctx, bool strict = true) const;

  const std::string& variant() const { return variant_; }

 private:
  std::string variant_;
  std::map<StageTag, std::string> templates_;
};

// Canonical binding serializers shared by the pipeline and tests.
std::string bind_bbox(const BoundingBox& box);         // four integers
std::string bind_number(double value);                  // shortest round-trip
std::string bind_bool(bool value);                      // true|false
std::string bind_role_tags(const std::vector<std::string>& tags);
std::string bind_anchor_votes(const std::vector<AnchorVote>& votes);

/// All placeholder names any builtin template may use; the lint test checks
/// templates against this set.
const std::set<std::string>& documented_bindings();

}  // namespace garssl
