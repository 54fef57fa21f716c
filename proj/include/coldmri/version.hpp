#pragma once

namespace coldmri {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coldmri
