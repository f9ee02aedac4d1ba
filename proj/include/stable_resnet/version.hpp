#pragma once

namespace sresnet {
inline constexpr const char* kVersion = "0.1.0";
}
