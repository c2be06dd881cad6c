#pragma once

namespace factorlens {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace factorlens
