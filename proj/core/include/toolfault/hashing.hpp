#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace toolfault {

// 64-bit FNV-1a. Used for task hashes and content-addressed run directories;
// not a security primitive.
std::uint64_t fnv1a64(std::string_view data) noexcept;

// Lowercase 16-digit hex.
std::string hex64(std::uint64_t value);

}  // namespace toolfault
