#include "garssl/stage.hpp"

#include "garssl/error.hpp"

namespace garssl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoStructuredBlock: return "NoStructuredBlock";
    case ErrorCode::MalformedBlock: return "MalformedBlock";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::WrongType: return "WrongType";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::MediaUnreadable: return "MediaUnreadable";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::ExtraBinding: return "ExtraBinding";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::EmptyTrials: return "EmptyTrials";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidGroundTruth: return "InvalidGroundTruth";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ManifestError: return "ManifestError";
  }
  return "Unknown";
}

std::string_view stage_name(StageTag tag) {
  switch (tag) {
    case StageTag::GenLoc: return "gen_loc";
    case StageTag::GenAud: return "gen_aud";
    case StageTag::GenLocMulti: return "gen_loc_multi";
    case StageTag::GenAudMulti: return "gen_aud_multi";
    case StageTag::Analysis: return "analysis";
    case StageTag::Refine: return "refine";
  }
  return "unknown";
}

std::optional<StageTag> stage_from_name(std::string_view name) {
  if (name == "gen_loc") return StageTag::GenLoc;
  if (name == "gen_aud") return StageTag::GenAud;
  if (name == "gen_loc_multi") return StageTag::GenLocMulti;
  if (name == "gen_aud_multi") return StageTag::GenAudMulti;
  if (name == "analysis") return StageTag::Analysis;
  if (name == "refine") return StageTag::Refine;
  return std::nullopt;
}

}  // namespace garssl
