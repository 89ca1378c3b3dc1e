#pragma once

namespace oz {
inline constexpr const char* kVersion = "0.1.0";
}
