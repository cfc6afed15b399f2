#pragma once

namespace attnscope {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace attnscope
