#pragma once

namespace uabs {

inline constexpr char kToolVersion[] = "0.1.0";

}  // namespace uabs
