#pragma once

namespace anomet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace anomet
