#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "garssl/error.hpp"
#include "garssl/geometry.hpp"

namespace garssl {

struct GtBox {
  std::string class_token;  // lowercase
  BoundingBox box;
};

struct SampleManifest {
  std::string id;
  std::filesystem::path image_path;  // resolved against the manifest dir
  std::filesystem::path audio_path;
  std::string image_rel;  // as written in the manifest line
  std::string audio_rel;
  ImageDims dims;
  std::string mode;  // "single" | "duet"
  std::vector<GtBox> ground_truth;  // 1 for single, 2 for duet
  std::string split;
};

struct ManifestLoad {
  std::vector<SampleManifest> samples;
  std::vector<std::string> warnings;  // nonstandard dims etc.
};

/// Parses a line-delimited manifest. With check_media, file existence is
/// verified eagerly instead of at run time.
Result<ManifestLoad> load_manifest(const std::filesystem::path& path, bool check_media = false);

std::string serialize_manifest_line(const SampleManifest& sample);

/// Builds a duet manifest from two 224x224 single samples: dims become
/// 448x224 and b's ground truth shifts right by 224. The composite image and
/// mixed audio must already exist upstream; no pixel or audio work happens
/// here.
Result<SampleManifest> compose_duet(const SampleManifest& a, const SampleManifest& b,
                                    const std::string& composite_image_path,
                                    const std::string& mixed_audio_path);

}  // namespace garssl
