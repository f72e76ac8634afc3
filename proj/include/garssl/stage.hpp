#pragma once

#include <optional>
#include <string_view>

namespace garssl {

/// The pipeline's prompt/parse stages. The *Multi variants are the duet-mode
/// counterparts of Stage-1A/1B; they share the downstream machinery.
enum class StageTag {
  GenLoc,
  GenAud,
  GenLocMulti,
  GenAudMulti,
  Analysis,
  Refine,
};

std::string_view stage_name(StageTag tag);
std::optional<StageTag> stage_from_name(std::string_view name);

}  // namespace garssl
