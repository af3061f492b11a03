#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace tspace {

/// Lowercase hex MD5 of the given bytes.
std::string md5_hex(std::string_view data);
std::string md5_hex(std::span<const std::uint8_t> data);

}  // namespace tspace
