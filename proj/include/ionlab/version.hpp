#pragma once

namespace ionlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ionlab
