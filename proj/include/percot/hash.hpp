#pragma once

#include <string>
#include <string_view>

namespace percot {

// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace percot
