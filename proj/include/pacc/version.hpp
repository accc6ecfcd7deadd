#pragma once

namespace pacc {
inline constexpr const char* kVersion = "0.1.0";
}
