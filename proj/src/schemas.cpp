#include "garssl/schemas.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "garssl/util.hpp"

namespace garssl {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(); }

void note(std::vector<RepairNote>& notes, std::string path, const json& original,
          const json& repaired, std::string rule) {
  notes.push_back(RepairNote{std::move(path), dump(original), dump(repaired), std::move(rule)});
}

Result<const json*> require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    return make_error(ErrorCode::MissingField, std::string("missing field '") + field + "'");
  }
  return &*it;
}

Result<double> as_score(const json& v, const std::string& path, std::vector<RepairNote>& notes) {
  if (!v.is_number()) {
    return make_error(ErrorCode::WrongType, path + " must be a number, got " + dump(v));
  }
  double s = v.get<double>();
  if (s < 0.0 || s > 1.0) {
    double clamped = std::clamp(s, 0.0, 1.0);
    note(notes, path, v, clamped, "clamp_to_unit");
    return clamped;
  }
  return s;
}

Result<std::string> as_token(const json& v, const std::string& path,
                             std::vector<RepairNote>& notes) {
  if (!v.is_string()) {
    return make_error(ErrorCode::WrongType, path + " must be a string, got " + dump(v));
  }
  std::string raw = v.get<std::string>();
  std::string normalized = to_lower(trim(raw));
  if (normalized != raw) {
    note(notes, path, raw, normalized, "lowercase_trim");
  }
  return normalized;
}

Result<bool> as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) {
    return make_error(ErrorCode::WrongType, path + " must be a boolean, got " + dump(v));
  }
  return v.get<bool>();
}

Result<std::array<double, 4>> as_bbox(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) {
    return make_error(ErrorCode::WrongType, path + " must be a 4-number list, got " + dump(v));
  }
  std::array<double, 4> out{};
  for (size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) {
      return make_error(ErrorCode::WrongType,
                        path + "[" + std::to_string(i) + "] must be a number, got " + dump(v[i]));
    }
    out[i] = v[i].get<double>();
  }
  return out;
}

// Confidence field with the prompt's canonical name; "audio_confidence" is
// accepted as an alias (with a note).
Result<double> audio_confidence_field(const json& obj, const std::string& path_prefix,
                                      std::vector<RepairNote>& notes) {
  const json* v = nullptr;
  if (auto it = obj.find("audio_confidence_score"); it != obj.end() && !it->is_null()) {
    v = &*it;
  } else if (auto alias = obj.find("audio_confidence"); alias != obj.end() && !alias->is_null()) {
    v = &*alias;
    note(notes, path_prefix + "audio_confidence", "audio_confidence", "audio_confidence_score",
         "alias_field");
  } else {
    return make_error(ErrorCode::MissingField,
                      "missing field '" + path_prefix + "audio_confidence_score'");
  }
  return as_score(*v, path_prefix + "audio_confidence_score", notes);
}

Result<AudioReply> parse_audio_entry(const json& obj, const std::string& path_prefix,
                                     std::vector<RepairNote>& notes) {
  if (!obj.is_object()) {
    return make_error(ErrorCode::WrongType, path_prefix + " must be an object, got " + dump(obj));
  }
  auto cls = require(obj, "audio_class");
  if (!cls) return cls.error();
  auto token = as_token(*cls.value(), path_prefix + "audio_class", notes);
  if (!token) return token.error();
  if (token.value().empty()) {
    return make_error(ErrorCode::WrongType, path_prefix + "audio_class is empty after trimming");
  }
  auto conf = audio_confidence_field(obj, path_prefix, notes);
  if (!conf) return conf.error();
  return AudioReply{token.value(), conf.value()};
}

Result<LocalizationReply> parse_localization(const json& obj, std::vector<RepairNote>& notes) {
  auto bbox = require(obj, "bbox");
  if (!bbox) return bbox.error();
  auto raw = as_bbox(*bbox.value(), "bbox");
  if (!raw) return raw.error();
  auto desc = require(obj, "description");
  if (!desc) return desc.error();
  if (!desc.value()->is_string()) {
    return make_error(ErrorCode::WrongType, "description must be a string");
  }
  (void)notes;
  return LocalizationReply{raw.value(), desc.value()->get<std::string>()};
}

Result<AudioReply> parse_audio(const json& obj, std::vector<RepairNote>& notes) {
  return parse_audio_entry(obj, "", notes);
}

Result<MultiAudioReply> parse_multi_audio(const json& obj, std::vector<RepairNote>& notes) {
  auto arr = require(obj, "audio_classes");
  if (!arr) return arr.error();
  if (!arr.value()->is_array()) {
    return make_error(ErrorCode::WrongType, "audio_classes must be a list");
  }
  std::vector<AudioReply> entries;
  for (size_t i = 0; i < arr.value()->size(); ++i) {
    std::string prefix = "audio_classes[" + std::to_string(i) + "].";
    auto entry = parse_audio_entry((*arr.value())[i], prefix, notes);
    if (!entry) return entry.error();
    entries.push_back(std::move(entry).value());
  }
  if (entries.empty()) {
    return make_error(ErrorCode::WrongType, "audio_classes is empty");
  }
  // Identical class tokens collapse to the strongest claim.
  std::vector<AudioReply> merged;
  for (const auto& e : entries) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const AudioReply& m) { return m.audio_class == e.audio_class; });
    if (it == merged.end()) {
      merged.push_back(e);
    } else {
      double best = std::max(it->audio_confidence, e.audio_confidence);
      note(notes, "audio_classes", e.audio_class, best, "merge_duplicate_class");
      it->audio_confidence = best;
    }
  }
  std::stable_sort(merged.begin(), merged.end(), [](const AudioReply& a, const AudioReply& b) {
    if (a.audio_confidence != b.audio_confidence) return a.audio_confidence > b.audio_confidence;
    return a.audio_class < b.audio_class;
  });
  if (merged.size() > static_cast<size_t>(kMaxDuetClasses)) {
    json dropped = json::array();
    for (size_t i = kMaxDuetClasses; i < merged.size(); ++i) dropped.push_back(merged[i].audio_class);
    merged.resize(kMaxDuetClasses);
    note(notes, "audio_classes", dropped, json::array(), "truncate_audio_classes");
  }
  return MultiAudioReply{std::move(merged)};
}

Result<AnalysisReply> parse_analysis(const json& obj, std::vector<RepairNote>& notes) {
  AnalysisReply out;

  auto sav = require(obj, "av_consistency");
  if (!sav) return sav.error();
  auto score = as_score(*sav.value(), "av_consistency", notes);
  if (!score) return score.error();
  out.av_consistency = score.value();

  auto tags = require(obj, "role_tags");
  if (!tags) return tags.error();
  if (!tags.value()->is_array()) {
    return make_error(ErrorCode::WrongType, "role_tags must be a list");
  }
  for (size_t i = 0; i < tags.value()->size(); ++i) {
    std::string path = "role_tags[" + std::to_string(i) + "]";
    auto token = as_token((*tags.value())[i], path, notes);
    if (!token) return token.error();
    if (token.value().empty()) {
      note(notes, path, (*tags.value())[i], json(), "drop_empty_token");
      continue;
    }
    out.role_tags.push_back(std::move(token).value());
  }
  if (out.role_tags.size() > static_cast<size_t>(kMaxRoleTags)) {
    json dropped = json(std::vector<std::string>(out.role_tags.begin() + kMaxRoleTags,
                                                 out.role_tags.end()));
    out.role_tags.resize(kMaxRoleTags);
    note(notes, "role_tags", dropped, json::array(), "truncate_role_tags");
  }

  auto votes = require(obj, "anchor_votes");
  if (!votes) return votes.error();
  if (!votes.value()->is_array()) {
    return make_error(ErrorCode::WrongType, "anchor_votes must be a list");
  }
  std::vector<AnchorVote> anchors;
  for (size_t i = 0; i < votes.value()->size(); ++i) {
    const json& item = (*votes.value())[i];
    std::string prefix = "anchor_votes[" + std::to_string(i) + "]";
    if (!item.is_object()) {
      return make_error(ErrorCode::WrongType, prefix + " must be an object, got " + dump(item));
    }
    auto name_field = require(item, "anchor");
    if (!name_field) return name_field.error();
    auto token = as_token(*name_field.value(), prefix + ".anchor", notes);
    if (!token) return token.error();
    if (token.value().empty()) {
      note(notes, prefix, item, json(), "drop_empty_token");
      continue;
    }
    auto score_field = require(item, "score");
    if (!score_field) return score_field.error();
    auto s = as_score(*score_field.value(), prefix + ".score", notes);
    if (!s) return s.error();
    anchors.push_back(AnchorVote{std::move(token).value(), s.value()});
  }
  // Duplicate anchor names merge by max score before the cardinality bound
  // applies.
  std::vector<AnchorVote> merged;
  for (const auto& a : anchors) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const AnchorVote& m) { return m.anchor == a.anchor; });
    if (it == merged.end()) {
      merged.push_back(a);
    } else {
      double best = std::max(it->score, a.score);
      note(notes, "anchor_votes", a.anchor, best, "merge_duplicate_anchor");
      it->score = best;
    }
  }
  // Canonical order: score descending, ties by token. Truncation drops the
  // tail (lowest scores first).
  std::stable_sort(merged.begin(), merged.end(), [](const AnchorVote& a, const AnchorVote& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.anchor < b.anchor;
  });
  if (merged.size() > static_cast<size_t>(kMaxAnchors)) {
    json dropped = json::array();
    for (size_t i = kMaxAnchors; i < merged.size(); ++i) dropped.push_back(merged[i].anchor);
    merged.resize(kMaxAnchors);
    note(notes, "anchor_votes", dropped, json::array(), "truncate_anchors");
  }
  out.anchor_votes = std::move(merged);

  auto keep = require(obj, "keep");
  if (!keep) return keep.error();
  auto flag = as_bool(*keep.value(), "keep");
  if (!flag) return flag.error();
  out.keep = flag.value();
  return out;
}

Result<std::optional<RefinementOp>> parse_ops(const json& v, std::vector<RepairNote>& notes) {
  if (v.is_null()) return std::optional<RefinementOp>{};
  if (!v.is_object()) {
    note(notes, "ops", v, json(), "ops_dropped_malformed");
    return std::optional<RefinementOp>{};
  }
  auto kind_it = v.find("op");
  if (kind_it == v.end() || !kind_it->is_string()) {
    note(notes, "ops", v, json(), "ops_dropped_malformed");
    return std::optional<RefinementOp>{};
  }
  const std::string kind = to_lower(trim(kind_it->get<std::string>()));
  auto num = [&](const char* field, double fallback, bool required,
                 bool* bad) -> double {
    auto it = v.find(field);
    if (it == v.end() || it->is_null()) {
      if (required) *bad = true;
      return fallback;
    }
    if (!it->is_number()) {
      *bad = true;
      return fallback;
    }
    return it->get<double>();
  };
  bool bad = false;
  if (kind == "delta") {
    DeltaOp op;
    op.dx = num("dx", 0.0, false, &bad);
    op.dy = num("dy", 0.0, false, &bad);
    op.d_left = num("d_l", 0.0, false, &bad);
    op.d_right = num("d_r", 0.0, false, &bad);
    op.d_top = num("d_t", 0.0, false, &bad);
    op.d_bottom = num("d_b", 0.0, false, &bad);
    if (!bad) return std::optional<RefinementOp>{op};
  } else if (kind == "expand" || kind == "shrink") {
    double a = num("a", 0.0, true, &bad);
    if (!bad) {
      return std::optional<RefinementOp>{ExpandShrinkOp{kind == "shrink" ? -a : a}};
    }
  } else if (kind == "recenter") {
    RecenterOp op;
    op.cx = num("cx", 0.0, true, &bad);
    op.cy = num("cy", 0.0, true, &bad);
    if (!bad) return std::optional<RefinementOp>{op};
  }
  note(notes, "ops", v, json(), "ops_dropped_malformed");
  return std::optional<RefinementOp>{};
}

Result<RefinementReply> parse_refinement(const json& obj, std::vector<RepairNote>& notes) {
  RefinementReply out;
  auto bbox = require(obj, "bbox");
  if (!bbox) return bbox.error();
  auto raw = as_bbox(*bbox.value(), "bbox");
  if (!raw) return raw.error();
  out.bbox_raw = raw.value();

  auto changed = require(obj, "changed");
  if (!changed) return changed.error();
  auto flag = as_bool(*changed.value(), "changed");
  if (!flag) return flag.error();
  out.changed = flag.value();

  auto desc = require(obj, "refined_description");
  if (!desc) return desc.error();
  if (!desc.value()->is_string()) {
    return make_error(ErrorCode::WrongType, "refined_description must be a string");
  }
  out.refined_description = desc.value()->get<std::string>();

  if (auto it = obj.find("ops"); it != obj.end()) {
    auto op = parse_ops(*it, notes);
    if (!op) return op.error();
    out.op = op.value();
  }
  if (!out.changed && out.op.has_value()) {
    note(notes, "ops", op_to_json(*out.op), json(), "ops_nulled_unchanged");
    out.op.reset();
  }
  return out;
}

}  // namespace

Result<json> extract_structured_block(std::string_view raw_text) {
  size_t search_from = 0;
  while (true) {
    size_t start = raw_text.find('{', search_from);
    if (start == std::string_view::npos) {
      return make_error(ErrorCode::NoStructuredBlock, "no balanced object in response text");
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw_text.size(); ++i) {
      char c = raw_text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          std::string_view span = raw_text.substr(start, i - start + 1);
          json parsed = json::parse(span, nullptr, /*allow_exceptions=*/false);
          if (parsed.is_discarded()) {
            return make_error(ErrorCode::MalformedBlock,
                              "balanced block is not valid JSON: " + std::string(span.substr(0, 120)));
          }
          return parsed;
        }
      }
    }
    // This opening brace never balances; try the next one.
    search_from = start + 1;
  }
}

Result<ParsedReply> parse_reply(StageTag stage, const json& value) {
  if (!value.is_object()) {
    return make_error(ErrorCode::WrongType, "reply must be a JSON object");
  }
  std::vector<RepairNote> notes;
  switch (stage) {
    case StageTag::GenLoc:
    case StageTag::GenLocMulti: {
      auto r = parse_localization(value, notes);
      if (!r) return r.error();
      return ParsedReply{std::move(r).value(), std::move(notes)};
    }
    case StageTag::GenAud: {
      auto r = parse_audio(value, notes);
      if (!r) return r.error();
      return ParsedReply{std::move(r).value(), std::move(notes)};
    }
    case StageTag::GenAudMulti: {
      auto r = parse_multi_audio(value, notes);
      if (!r) return r.error();
      return ParsedReply{std::move(r).value(), std::move(notes)};
    }
    case StageTag::Analysis: {
      auto r = parse_analysis(value, notes);
      if (!r) return r.error();
      return ParsedReply{std::move(r).value(), std::move(notes)};
    }
    case StageTag::Refine: {
      auto r = parse_refinement(value, notes);
      if (!r) return r.error();
      return ParsedReply{std::move(r).value(), std::move(notes)};
    }
  }
  return make_error(ErrorCode::WrongType, "unknown stage");
}

json to_json(const LocalizationReply& reply) {
  return json{{"bbox", reply.bbox_raw}, {"description", reply.description}};
}

json to_json(const AudioReply& reply) {
  return json{{"audio_class", reply.audio_class},
              {"audio_confidence_score", reply.audio_confidence}};
}

json to_json(const MultiAudioReply& reply) {
  json arr = json::array();
  for (const auto& e : reply.classes) arr.push_back(to_json(e));
  return json{{"audio_classes", std::move(arr)}};
}

json to_json(const AnalysisReply& reply) {
  json votes = json::array();
  for (const auto& v : reply.anchor_votes) {
    votes.push_back(json{{"anchor", v.anchor}, {"score", v.score}});
  }
  return json{{"av_consistency", reply.av_consistency},
              {"role_tags", reply.role_tags},
              {"anchor_votes", std::move(votes)},
              {"keep", reply.keep}};
}

json op_to_json(const RefinementOp& op) {
  if (const auto* d = std::get_if<DeltaOp>(&op)) {
    return json{{"op", "delta"}, {"dx", d->dx},      {"dy", d->dy},
                {"d_l", d->d_left}, {"d_r", d->d_right}, {"d_t", d->d_top},
                {"d_b", d->d_bottom}};
  }
  if (const auto* e = std::get_if<ExpandShrinkOp>(&op)) {
    if (e->amount < 0.0) return json{{"op", "shrink"}, {"a", -e->amount}};
    return json{{"op", "expand"}, {"a", e->amount}};
  }
  const auto& r = std::get<RecenterOp>(op);
  return json{{"op", "recenter"}, {"cx", r.cx}, {"cy", r.cy}};
}

json to_json(const RefinementReply& reply) {
  return json{{"bbox", reply.bbox_raw},
              {"changed", reply.changed},
              {"ops", reply.op ? op_to_json(*reply.op) : json()},
              {"refined_description", reply.refined_description}};
}

json to_json(const RepairNote& note) {
  return json{{"path", note.path},
              {"original", note.original},
              {"repaired", note.repaired},
              {"rule", note.rule}};
}

}  // namespace garssl
