#pragma once

namespace mapg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mapg
