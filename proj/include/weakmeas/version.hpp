#pragma once

namespace weakmeas {

#ifdef WEAKMEAS_VERSION
inline constexpr const char* kVersion = WEAKMEAS_VERSION;
#else
inline constexpr const char* kVersion = "v0.0.0-unknown";
#endif

}  // namespace weakmeas
