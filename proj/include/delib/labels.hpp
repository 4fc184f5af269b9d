#pragma once

#include <optional>
#include <string>
#include <unordered_map>

namespace delib {

// Final labels of one run keyed by sentence id. std::nullopt marks a schema
// failure (the sentence was attempted but no valid label was parsed).
using RunLabels = std::unordered_map<std::string, std::optional<int>>;

}  // namespace delib
