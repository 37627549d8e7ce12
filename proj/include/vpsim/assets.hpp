#pragma once

#include <string_view>

// Built-in copies of the files under assets/. Keys are paths relative to
// that directory, e.g. "prompts/role.txt". Unknown keys yield an empty view.
namespace vpsim::assets {

std::string_view builtin(std::string_view key);

}  // namespace vpsim::assets
