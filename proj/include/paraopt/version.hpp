#pragma once

namespace paraopt {

inline constexpr const char* version_string = "0.1.0";

} // namespace paraopt
