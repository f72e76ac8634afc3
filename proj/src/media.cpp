#include "garssl/media.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "garssl/util.hpp"

namespace garssl {

namespace {

Result<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return make_error(ErrorCode::MediaUnreadable, "cannot open media file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    return make_error(ErrorCode::MediaUnreadable, "read error on media file: " + path.string());
  }
  return buf.str();
}

bool starts_with(const std::string& data, std::string_view magic, size_t offset = 0) {
  return data.size() >= offset + magic.size() &&
         std::string_view(data).substr(offset, magic.size()) == magic;
}

uint32_t read_be32(const std::string& data, size_t offset) {
  return (static_cast<uint32_t>(static_cast<unsigned char>(data[offset])) << 24) |
         (static_cast<uint32_t>(static_cast<unsigned char>(data[offset + 1])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(data[offset + 2])) << 8) |
         static_cast<uint32_t>(static_cast<unsigned char>(data[offset + 3]));
}

std::optional<ImageDims> png_dims(const std::string& data) {
  // Signature (8) + IHDR length/type (8), then width/height big-endian.
  if (data.size() < 24) return std::nullopt;
  return ImageDims{static_cast<int>(read_be32(data, 16)), static_cast<int>(read_be32(data, 20))};
}

std::optional<ImageDims> jpeg_dims(const std::string& data) {
  // Walk the marker stream to the first SOF segment.
  size_t i = 2;
  while (i + 9 < data.size()) {
    if (static_cast<unsigned char>(data[i]) != 0xFF) return std::nullopt;
    unsigned char marker = static_cast<unsigned char>(data[i + 1]);
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      i += 2;
      continue;
    }
    if (i + 4 > data.size()) return std::nullopt;
    size_t seg_len = (static_cast<unsigned char>(data[i + 2]) << 8) |
                     static_cast<unsigned char>(data[i + 3]);
    bool is_sof = (marker >= 0xC0 && marker <= 0xCF) && marker != 0xC4 && marker != 0xC8 &&
                  marker != 0xCC;
    if (is_sof) {
      if (i + 9 >= data.size()) return std::nullopt;
      int h = (static_cast<unsigned char>(data[i + 5]) << 8) |
              static_cast<unsigned char>(data[i + 6]);
      int w = (static_cast<unsigned char>(data[i + 7]) << 8) |
              static_cast<unsigned char>(data[i + 8]);
      return ImageDims{w, h};
    }
    if (seg_len < 2) return std::nullopt;
    i += 2 + seg_len;
  }
  return std::nullopt;
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
  static const char* kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 0x3F]);
    out.push_back(kAlphabet[(v >> 12) & 0x3F]);
    out.push_back(kAlphabet[(v >> 6) & 0x3F]);
    out.push_back(kAlphabet[v & 0x3F]);
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kAlphabet[(v >> 18) & 0x3F]);
    out.push_back(kAlphabet[(v >> 12) & 0x3F]);
    out.append("==");
  } else if (i + 2 == bytes.size()) {
    uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kAlphabet[(v >> 18) & 0x3F]);
    out.push_back(kAlphabet[(v >> 12) & 0x3F]);
    out.push_back(kAlphabet[(v >> 6) & 0x3F]);
    out.push_back('=');
  }
  return out;
}

Result<MediaAttachment> encode_media(const std::filesystem::path& path, MediaKind kind,
                                     const std::optional<ImageDims>& expected_dims) {
  auto data = read_file(path);
  if (!data) return data.error();
  const std::string& bytes = data.value();

  MediaAttachment att;
  att.kind = kind;
  att.source_path = path.string();

  if (kind == MediaKind::Image) {
    if (starts_with(bytes, "\x89PNG\r\n\x1a\n")) {
      att.mime = "image/png";
      att.dims = png_dims(bytes);
    } else if (starts_with(bytes, "\xFF\xD8")) {
      att.mime = "image/jpeg";
      att.dims = jpeg_dims(bytes);
    } else {
      return make_error(ErrorCode::UnsupportedFormat,
                        "image must be PNG or JPEG: " + path.string());
    }
    if (expected_dims && att.dims && !(*att.dims == *expected_dims)) {
      std::ostringstream os;
      os << "DimensionMismatch: manifest says " << expected_dims->width << "x"
         << expected_dims->height << " but file is " << att.dims->width << "x"
         << att.dims->height;
      att.warning = os.str();
    }
  } else {
    if (starts_with(bytes, "RIFF") && starts_with(bytes, "WAVE", 8)) {
      att.mime = "audio/wav";
    } else if (starts_with(bytes, "fLaC")) {
      att.mime = "audio/flac";
    } else {
      return make_error(ErrorCode::UnsupportedFormat,
                        "audio must be WAV or FLAC: " + path.string());
    }
  }

  att.content_digest = to_hex(fnv1a64(bytes));
  att.base64 = base64_encode(bytes);
  return att;
}

}  // namespace garssl
