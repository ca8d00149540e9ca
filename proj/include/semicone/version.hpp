#pragma once

namespace semicone {
inline constexpr const char* kVersion = "0.1.0";
}
