#include "garssl/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "garssl/util.hpp"

namespace garssl {

using nlohmann::json;

namespace {

constexpr int kSingleWidth = 224;
constexpr int kSingleHeight = 224;
constexpr int kDuetWidth = 448;

Error line_error(ErrorCode code, size_t line_no, const std::string& what) {
  return make_error(code, "line " + std::to_string(line_no) + ": " + what);
}

// Ground truth is held to the box invariants strictly; silent clamping here
// would hide annotation bugs.
bool gt_box_ok(const BoundingBox& b, const ImageDims& dims) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2) &&
         b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= dims.width && b.y2 <= dims.height && b.x1 < b.x2 &&
         b.y1 < b.y2;
}

Result<SampleManifest> parse_line(const json& rec, size_t line_no,
                                  const std::filesystem::path& base_dir) {
  for (const char* field : {"id", "image", "audio", "width", "height", "mode", "gt"}) {
    if (!rec.contains(field)) {
      return line_error(ErrorCode::ParseError, line_no, std::string("missing field '") + field + "'");
    }
  }
  SampleManifest s;
  if (!rec["id"].is_string() || rec["id"].get<std::string>().empty()) {
    return line_error(ErrorCode::ParseError, line_no, "id must be a non-empty string");
  }
  s.id = rec["id"].get<std::string>();
  if (!rec["image"].is_string() || !rec["audio"].is_string()) {
    return line_error(ErrorCode::ParseError, line_no, "image/audio must be strings");
  }
  s.image_rel = rec["image"].get<std::string>();
  s.audio_rel = rec["audio"].get<std::string>();
  s.image_path = base_dir / s.image_rel;
  s.audio_path = base_dir / s.audio_rel;
  if (!rec["width"].is_number_integer() || !rec["height"].is_number_integer()) {
    return line_error(ErrorCode::ParseError, line_no, "width/height must be integers");
  }
  s.dims = ImageDims{rec["width"].get<int>(), rec["height"].get<int>()};
  if (!s.dims.valid()) {
    return line_error(ErrorCode::ParseError, line_no, "width/height must be >= 1");
  }
  if (!rec["mode"].is_string()) {
    return line_error(ErrorCode::ParseError, line_no, "mode must be a string");
  }
  s.mode = rec["mode"].get<std::string>();
  if (s.mode != "single" && s.mode != "duet") {
    return line_error(ErrorCode::ParseError, line_no, "mode must be 'single' or 'duet'");
  }
  s.split = rec.value("split", std::string());

  if (!rec["gt"].is_array() || rec["gt"].empty()) {
    return line_error(ErrorCode::InvalidGroundTruth, line_no, "gt must be a non-empty list");
  }
  const size_t expected = s.mode == "duet" ? 2 : 1;
  if (rec["gt"].size() != expected) {
    return line_error(ErrorCode::InvalidGroundTruth, line_no,
                      s.mode + " sample must have exactly " + std::to_string(expected) +
                          " gt entries, got " + std::to_string(rec["gt"].size()));
  }
  for (const auto& g : rec["gt"]) {
    if (!g.is_object() || !g.contains("class") || !g["class"].is_string() || !g.contains("box") ||
        !g["box"].is_array() || g["box"].size() != 4) {
      return line_error(ErrorCode::InvalidGroundTruth, line_no,
                        "gt entries must be {class, box:[x1,y1,x2,y2]}");
    }
    GtBox gt;
    gt.class_token = to_lower(trim(g["class"].get<std::string>()));
    if (gt.class_token.empty()) {
      return line_error(ErrorCode::InvalidGroundTruth, line_no, "gt class is empty");
    }
    for (size_t i = 0; i < 4; ++i) {
      if (!g["box"][i].is_number()) {
        return line_error(ErrorCode::InvalidGroundTruth, line_no, "gt box must be numeric");
      }
    }
    gt.box = BoundingBox{g["box"][0].get<double>(), g["box"][1].get<double>(),
                         g["box"][2].get<double>(), g["box"][3].get<double>()};
    if (!gt_box_ok(gt.box, s.dims)) {
      return line_error(ErrorCode::InvalidGroundTruth, line_no,
                        "gt box violates invariants: " + g["box"].dump());
    }
    s.ground_truth.push_back(std::move(gt));
  }
  return s;
}

}  // namespace

Result<ManifestLoad> load_manifest(const std::filesystem::path& path, bool check_media) {
  std::ifstream in(path);
  if (!in) {
    return make_error(ErrorCode::ManifestError, "cannot open manifest: " + path.string());
  }
  const std::filesystem::path base_dir = path.parent_path();
  ManifestLoad out;
  std::set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) {
      return line_error(ErrorCode::ParseError, line_no, "not a JSON object");
    }
    auto sample = parse_line(rec, line_no, base_dir);
    if (!sample) return sample.error();
    SampleManifest s = std::move(sample).value();
    if (!seen.insert(s.id).second) {
      return line_error(ErrorCode::DuplicateId, line_no, "duplicate sample id '" + s.id + "'");
    }
    const ImageDims expected = s.mode == "duet" ? ImageDims{kDuetWidth, kSingleHeight}
                                                : ImageDims{kSingleWidth, kSingleHeight};
    if (!(s.dims == expected)) {
      std::ostringstream warn;
      warn << s.id << ": nonstandard " << s.mode << " dims " << s.dims.width << "x"
           << s.dims.height;
      out.warnings.push_back(warn.str());
    }
    if (check_media) {
      if (!std::filesystem::exists(s.image_path)) {
        return line_error(ErrorCode::ManifestError, line_no,
                          "image file missing: " + s.image_path.string());
      }
      if (!std::filesystem::exists(s.audio_path)) {
        return line_error(ErrorCode::ManifestError, line_no,
                          "audio file missing: " + s.audio_path.string());
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

std::string serialize_manifest_line(const SampleManifest& sample) {
  json gt = json::array();
  for (const auto& g : sample.ground_truth) {
    gt.push_back(json{{"class", g.class_token},
                      {"box", {g.box.x1, g.box.y1, g.box.x2, g.box.y2}}});
  }
  json rec{
      {"id", sample.id},       {"image", sample.image_rel}, {"audio", sample.audio_rel},
      {"width", sample.dims.width}, {"height", sample.dims.height}, {"mode", sample.mode},
      {"gt", std::move(gt)},   {"split", sample.split},
  };
  return rec.dump();
}

Result<SampleManifest> compose_duet(const SampleManifest& a, const SampleManifest& b,
                                    const std::string& composite_image_path,
                                    const std::string& mixed_audio_path) {
  const ImageDims single{kSingleWidth, kSingleHeight};
  for (const SampleManifest* s : {&a, &b}) {
    if (s->mode != "single" || !(s->dims == single)) {
      return make_error(ErrorCode::DimensionMismatch,
                        s->id + " is not a 224x224 single sample (" + s->mode + " " +
                            std::to_string(s->dims.width) + "x" + std::to_string(s->dims.height) +
                            ")");
    }
  }
  SampleManifest duet;
  duet.id = a.id + "+" + b.id;
  duet.image_rel = composite_image_path;
  duet.audio_rel = mixed_audio_path;
  duet.image_path = composite_image_path;
  duet.audio_path = mixed_audio_path;
  duet.dims = ImageDims{kDuetWidth, kSingleHeight};
  duet.mode = "duet";
  duet.split = a.split;
  duet.ground_truth = a.ground_truth;
  for (GtBox g : b.ground_truth) {
    g.box.x1 += kSingleWidth;
    g.box.x2 += kSingleWidth;
    duet.ground_truth.push_back(std::move(g));
  }
  return duet;
}

}  // namespace garssl
