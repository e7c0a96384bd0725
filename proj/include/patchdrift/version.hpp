#pragma once

namespace patchdrift {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace patchdrift
