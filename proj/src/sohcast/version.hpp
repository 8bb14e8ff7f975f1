#pragma once

namespace sohcast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sohcast
