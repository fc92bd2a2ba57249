#pragma once

namespace umlab {

inline constexpr const char* kVersion = "1.0.0";

}
