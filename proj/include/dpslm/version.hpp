#pragma once

namespace dpslm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dpslm
