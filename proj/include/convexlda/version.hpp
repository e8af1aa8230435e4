#pragma once

namespace convexlda {
inline constexpr const char* kVersion = "0.1.0";
}
