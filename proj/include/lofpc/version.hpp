#pragma once

namespace lofpc {
inline constexpr const char* kVersion = "0.1.0";
}
