#pragma once

namespace roadnet {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace roadnet
