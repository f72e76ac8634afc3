#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "garssl/error.hpp"
#include "garssl/geometry.hpp"

namespace garssl {

enum class MediaKind { Image, Audio };

/// Wire-ready media payload: inline base64 with a declared media type.
/// No resizing or resampling happens here; media are assumed preprocessed
/// upstream. A dims disagreement with the manifest is only warned about.
struct MediaAttachment {
  MediaKind kind = MediaKind::Image;
  std::string mime;             // image/png, image/jpeg, audio/wav, audio/flac
  std::string base64;
  std::optional<ImageDims> dims;  // parsed from the header (images only)
  std::string content_digest;     // fnv1a64 hex of the raw bytes
  std::string source_path;
  std::optional<std::string> warning;  // e.g. dimension mismatch note
};

Result<MediaAttachment> encode_media(const std::filesystem::path& path, MediaKind kind,
                                     const std::optional<ImageDims>& expected_dims = std::nullopt);

std::string base64_encode(std::string_view bytes);

}  // namespace garssl
