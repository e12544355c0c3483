#pragma once

namespace vastvocab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vastvocab
