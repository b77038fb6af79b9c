#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mqttz {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

std::string to_hex(ByteView data);

// Throws Error(InvalidArgument) on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

// Zeroes memory in a way the optimizer may not elide.
void secure_wipe(std::span<std::uint8_t> data) noexcept;

// Returns true if `needle` occurs anywhere inside `haystack`.
bool contains_subsequence(ByteView haystack, ByteView needle);

}  // namespace mqttz
