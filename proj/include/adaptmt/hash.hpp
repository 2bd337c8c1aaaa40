#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace adaptmt {

/// 64-bit FNV-1a with the offset basis XORed with `seed`, followed by the
/// splitmix64 finalizer. Stable across platforms and releases.
std::uint64_t stable_hash64(std::string_view bytes, std::uint64_t seed = 0);

/// 16 lowercase hex digits of stable_hash64(text, 0). Used as the fixture key
/// for prompts.
std::string prompt_hash(std::string_view text);

}  // namespace adaptmt
