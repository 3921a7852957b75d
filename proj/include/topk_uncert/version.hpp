#pragma once

namespace topk_uncert {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace topk_uncert
