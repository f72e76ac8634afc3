#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "garssl/error.hpp"
#include "garssl/geometry.hpp"
#include "garssl/stage.hpp"

namespace garssl {

inline constexpr int kMaxRoleTags = 4;
inline constexpr int kMaxAnchors = 5;
inline constexpr int kMaxDuetClasses = 2;

/// One normalization applied while parsing a model reply. Only the
/// enumerated repair rules ever append these; semantics are never changed
/// beyond them.
struct RepairNote {
  std::string path;      // e.g. "anchor_votes[2].score"
  std::string original;  // serialized original value
  std::string repaired;  // serialized value after the rule
  std::string rule;      // e.g. "clamp_to_unit"
};

struct LocalizationReply {
  std::array<double, 4> bbox_raw{};
  std::string description;
};

struct AudioReply {
  std::string audio_class;
  double audio_confidence = 0.0;
};

struct MultiAudioReply {
  std::vector<AudioReply> classes;  // 1..kMaxDuetClasses, distinct class tokens
};

struct AnchorVote {
  std::string anchor;
  double score = 0.0;

  bool operator==(const AnchorVote&) const = default;
};

struct AnalysisReply {
  double av_consistency = 0.0;
  std::vector<std::string> role_tags;   // <= kMaxRoleTags
  std::vector<AnchorVote> anchor_votes; // <= kMaxAnchors, canonical order
  bool keep = false;
};

struct RefinementReply {
  std::array<double, 4> bbox_raw{};
  bool changed = false;
  std::optional<RefinementOp> op;  // parsed "ops" descriptor, when usable
  std::string refined_description;
};

using ReplyValue =
    std::variant<LocalizationReply, AudioReply, MultiAudioReply, AnalysisReply, RefinementReply>;

struct ParsedReply {
  ReplyValue value;
  std::vector<RepairNote> notes;
};

/// Finds and parses the first balanced top-level JSON object in free text,
/// discarding any surrounding prose.
Result<nlohmann::json> extract_structured_block(std::string_view raw_text);

/// Validates and normalizes a parsed object against the stage's schema.
/// Range violations are repaired (with a RepairNote each); structural
/// violations (missing field, wrong type/arity) are errors and signal a
/// retryable response.
Result<ParsedReply> parse_reply(StageTag stage, const nlohmann::json& value);

// Canonical serialized forms, matching the prompts' STRICT OUTPUT shapes.
// parse_reply(to_json(x)) is the identity with zero new notes.
nlohmann::json to_json(const LocalizationReply& reply);
nlohmann::json to_json(const AudioReply& reply);
nlohmann::json to_json(const MultiAudioReply& reply);
nlohmann::json to_json(const AnalysisReply& reply);
nlohmann::json to_json(const RefinementReply& reply);

nlohmann::json op_to_json(const RefinementOp& op);

nlohmann::json to_json(const RepairNote& note);

}  // namespace garssl
