#pragma once

namespace sman {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sman
