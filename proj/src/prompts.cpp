#include "garssl/prompts.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace garssl {

namespace {

// ---------------------------------------------------------------------------
// Stage 1 (Generation)
// ---------------------------------------------------------------------------

const char* kGenLoc = R"(You are an assistant for audio-visual sound source localization (SSL).

TASK (Stage A):
Given an IMAGE and an AUDIO clip from the same scene:
1) Locate exactly one main sound-emitting object in the image and output its bounding box as [x1, y1, x2, y2].
2) Provide a concise visual description of the sound-emitting object.

Image size: {W}x{H}

STRICT OUTPUT:
{
  "bbox": [x1, y1, x2, y2],
  "description": "visual description of the sound-emitting object"
}

- The bbox must be four integers in the original image coordinates (x1<x2, y1<y2).
- Do not output any text or fields outside the JSON object.
)";

const char* kGenLocMulti = R"(You are an assistant for audio-visual sound source localization (SSL).

TASK (Stage A):
Given an IMAGE and an AUDIO clip from the same scene:
1) Locate exactly one main sound-emitting object in the image that produces the sound of "{audio_class}", and output its bounding box as [x1, y1, x2, y2].
2) Provide a concise visual description of the sound-emitting object.

Image size: {W}x{H}

STRICT OUTPUT:
{
  "bbox": [x1, y1, x2, y2],
  "description": "visual description of the sound-emitting object"
}

- The bbox must be four integers in the original image coordinates (x1<x2, y1<y2).
- Do not output any text or fields outside the JSON object.
)";

const char* kGenAud = R"(You are an audio classification expert.

TASK (Stage B):
Listen to the AUDIO and classify the dominant audio event using a short, lowercase class name
(e.g., "violin", "piano", "dog barking", "engine", "drum set").
You must also provide a confidence score in the range [0.0, 1.0].

STRICT OUTPUT:
{
  "audio_class": "<concise class name>",
  "audio_confidence_score": <float>
}

- The class name must be lowercase and concise.
- The confidence must be a float between 0.0 and 1.0.
- Do not include any text outside the JSON.
)";

const char* kGenAudMulti = R"(You are an audio classification expert.

TASK (Stage B, multi-source):
Listen to the AUDIO, which may contain up to {K} distinct simultaneous sound sources.
Classify each distinct dominant audio event using a short, lowercase class name
(e.g., "violin", "piano", "dog barking", "engine", "drum set"),
and provide a confidence score in the range [0.0, 1.0] for each.

STRICT OUTPUT:
{
  "audio_classes": [
    {"audio_class": "<concise class name>", "audio_confidence_score": <float>}
  ]
}

- List at most {K} distinct classes, one entry per source.
- Class names must be lowercase and concise.
- Do not include any text outside the JSON.
)";

// ---------------------------------------------------------------------------
// Stage 2 (Analysis)
// ---------------------------------------------------------------------------

const char* kAnalysis = u8R"(You must verify whether the sound suggested by the AUDIO is actually visibly supported within the IMAGE.
You must rely only on the given image-audio pair and must not hallucinate unseen content.

Context:
- previous_bbox: {previous_bbox}
- audio_class: {audio_class}
- audio_confidence_score: {audio_confidence_score}
- image size [W x H]: [{W} x {H}]

Definitions:

- anchor_votes: propose 0–5 concise, lowercase visual anchors that represent visible causes of the sound indicated by the audio class.
  Examples:
  - applause -> "hands_clapping"
  - violin -> "bow_on_strings", "violin_body"
  - dog barking -> "dog_mouth_open"

  Format:
  {"anchor":"<token_with_underscores>", "score": s}
  where s is in [0,1].

- role_tags: up to four short tokens summarizing the visual roles or cues relied upon.
- av_consistency: audio-visual consistency score [0,1], based on
  (i) alignment between audio class and visible evidence,
  (ii) spatial proximity to previous bbox,
  (iii) clarity of the visible cues.
- keep: true only when refinement can be safely skipped.

STRICT OUTPUT:
{
  "av_consistency": <float>,
  "role_tags": [...],
  "anchor_votes": [...],
  "keep": <true|false>
}
)";

// ---------------------------------------------------------------------------
// Stage 3 (Refinement) — one template per prompt variant. The "ops" payload
// vocabulary is defined here; the schemas module parses exactly these shapes.
// ---------------------------------------------------------------------------

const char* kOpsVocabulary = R"(4) Optionally describe the modification using an "ops" field with one of:
   {"op": "delta", "dx": <px>, "dy": <px>, "d_l": <px>, "d_r": <px>, "d_t": <px>, "d_b": <px>}
   {"op": "expand", "a": <px>}   (a > 0; every side grows by a)
   {"op": "shrink", "a": <px>}   (a > 0; every side shrinks by a)
   {"op": "recenter", "cx": <px>, "cy": <px>}   (moves the box center; size unchanged)
5) Provide a factual refined_description consisting of 2-4 sentences describing the scene and its relation to the audio class.

STRICT OUTPUT:
{
  "bbox": [x1, y1, x2, y2],
  "changed": true/false,
  "ops": {...} | null,
  "refined_description": "..."
}
)";

std::string refine_ours() {
  std::string t = R"(You refine the bounding box of the main sound-emitting object by integrating IMAGE, AUDIO, and Stage 2 analysis results.

Context:
- previous_bbox: {previous_bbox}
- audio_class: {audio_class}
- image size W x H: {W} x {H}
- av_consistency: {av_consistency}
- role_tags: {role_tags}
- anchor_votes: {anchor_votes}
- keep: {keep}

Refinement Rules:
1) Produce a final bbox that best matches the audio class and verified visual anchors, while minimizing unnecessary change.
2) The bbox must remain inside the image bounds [0, {W}] x [0, {H}] and satisfy x1 < x2, y1 < y2.
3) Unless the previous box is clearly incorrect, limit coordinate adjustments to within ±{MAX_DELTA_PX} px per side.
)";
  return t + kOpsVocabulary;
}

std::string refine_method1() {
  std::string t = R"(You refine a candidate bounding box for the main sound-emitting object using the IMAGE and the AUDIO.

Context:
- previous_bbox: {previous_bbox}
- image size W x H: {W} x {H}

Refinement Rules:
1) Inspect the candidate box for size and position errors and produce the best final bbox.
2) The bbox must remain inside the image bounds [0, {W}] x [0, {H}] and satisfy x1 < x2, y1 < y2.
3) When refinement is needed, adjust each affected coordinate by at least 1 pixel and at most ±{MAX_DELTA_PX} px per side; otherwise return the box unchanged.
)";
  return t + kOpsVocabulary;
}

std::string refine_method2() {
  std::string t = R"(You refine a candidate bounding box for the main sound-emitting object using the IMAGE, the AUDIO, and the audio class extracted from the audio alone.

Context:
- previous_bbox: {previous_bbox}
- audio_class: {audio_class}
- image size W x H: {W} x {H}

Refinement Rules:
1) Produce a final bbox that logically aligns with the audio class, while minimizing unnecessary change.
2) The bbox must remain inside the image bounds [0, {W}] x [0, {H}] and satisfy x1 < x2, y1 < y2.
3) Unless the previous box is clearly incorrect, limit coordinate adjustments to within ±{MAX_DELTA_PX} px per side.
)";
  return t + kOpsVocabulary;
}

std::string refine_method3() {
  std::string t = R"(You refine a candidate bounding box for the main sound-emitting object by interpreting the relationships among the audio class, the candidate box, and the visible anchors (sound-producing sub-parts).

Context:
- previous_bbox: {previous_bbox}
- audio_class: {audio_class}
- anchor_votes: {anchor_votes}
- image size W x H: {W} x {H}

Refinement Rules:
1) Produce a final bbox that best matches the audio class and the visible anchors, while minimizing unnecessary change.
2) The bbox must remain inside the image bounds [0, {W}] x [0, {H}] and satisfy x1 < x2, y1 < y2.
3) Unless the previous box is clearly incorrect, limit coordinate adjustments to within ±{MAX_DELTA_PX} px per side.
)";
  return t + kOpsVocabulary;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Scans `text` for {identifier} placeholder spans and calls `fn(name, begin,
// end)` for each. Literal braces in JSON examples never match because the
// character right after '{' is not an identifier character.
template <typename Fn>
void scan_placeholders(const std::string& text, Fn&& fn) {
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    if (j > i + 1 && j < text.size() && text[j] == '}') {
      fn(text.substr(i + 1, j - i - 1), i, j + 1);
      i = j + 1;
    } else {
      ++i;
    }
  }
}

}  // namespace

const std::array<const char*, 4> kPromptVariants = {"ours", "method1", "method2", "method3"};

bool PromptLibrary::known_variant(const std::string& variant) {
  for (const char* v : kPromptVariants) {
    if (variant == v) return true;
  }
  return false;
}

PromptLibrary PromptLibrary::builtin(const std::string& variant) {
  PromptLibrary lib;
  lib.variant_ = known_variant(variant) ? variant : "ours";
  lib.templates_[StageTag::GenLoc] = kGenLoc;
  lib.templates_[StageTag::GenLocMulti] = kGenLocMulti;
  lib.templates_[StageTag::GenAud] = kGenAud;
  lib.templates_[StageTag::GenAudMulti] = kGenAudMulti;
  lib.templates_[StageTag::Analysis] = kAnalysis;
  if (lib.variant_ == "method1") {
    lib.templates_[StageTag::Refine] = refine_method1();
  } else if (lib.variant_ == "method2") {
    lib.templates_[StageTag::Refine] = refine_method2();
  } else if (lib.variant_ == "method3") {
    lib.templates_[StageTag::Refine] = refine_method3();
  } else {
    lib.templates_[StageTag::Refine] = refine_ours();
  }
  return lib;
}

Status PromptLibrary::apply_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    return make_error(ErrorCode::ConfigError, "prompt override dir not found: " + dir.string());
  }
  for (auto& [stage, text] : templates_) {
    std::filesystem::path file = dir / (std::string(stage_name(stage)) + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file);
    if (!in) {
      return make_error(ErrorCode::ConfigError, "cannot read prompt override: " + file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return ok_status();
}

const std::string& PromptLibrary::text(StageTag stage) const { return templates_.at(stage); }

std::vector<std::string> PromptLibrary::placeholders(StageTag stage) const {
  std::vector<std::string> out;
  scan_placeholders(templates_.at(stage), [&](const std::string& name, size_t, size_t) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  });
  return out;
}

Result<std::string> PromptLibrary::render(StageTag stage, const PromptContext& ctx,
                                          bool strict) const {
  const std::string& tmpl = templates_.at(stage);
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::optional<Error> failure;
  std::set<std::string> used;
  size_t copied = 0;
  scan_placeholders(tmpl, [&](const std::string& name, size_t begin, size_t end) {
    if (failure) return;
    auto it = ctx.find(name);
    if (it == ctx.end()) {
      failure = make_error(ErrorCode::MissingBinding, "no binding for placeholder {" + name +
                                                          "} in " + std::string(stage_name(stage)));
      return;
    }
    out.append(tmpl, copied, begin - copied);
    out.append(it->second);
    used.insert(name);
    copied = end;
  });
  if (failure) return *failure;
  out.append(tmpl, copied, tmpl.size() - copied);
  if (strict) {
    for (const auto& [key, _] : ctx) {
      if (!used.count(key)) {
        return make_error(ErrorCode::ExtraBinding, "binding '" + key + "' unused by " +
                                                       std::string(stage_name(stage)));
      }
    }
  }
  return out;
}

std::string bind_bbox(const BoundingBox& box) {
  std::ostringstream os;
  os << "[" << std::llround(box.x1) << ", " << std::llround(box.y1) << ", " << std::llround(box.x2)
     << ", " << std::llround(box.y2) << "]";
  return os.str();
}

std::string bind_number(double value) { return nlohmann::json(value).dump(); }

std::string bind_bool(bool value) { return value ? "true" : "false"; }

std::string bind_role_tags(const std::vector<std::string>& tags) {
  return nlohmann::json(tags).dump();
}

std::string bind_anchor_votes(const std::vector<AnchorVote>& votes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : votes) {
    arr.push_back(nlohmann::json{{"anchor", v.anchor}, {"score", v.score}});
  }
  return arr.dump();
}

const std::set<std::string>& documented_bindings() {
  static const std::set<std::string> kBindings = {
      "W",          "H",         "previous_bbox", "audio_class", "audio_confidence_score",
      "av_consistency", "role_tags", "anchor_votes",  "keep",        "MAX_DELTA_PX",
      "K",
  };
  return kBindings;
}

}  // namespace garssl
