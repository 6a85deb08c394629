#pragma once

#include <string>
#include <string_view>

namespace slick {

// SHA-256 hex digest (lowercase).
std::string sha256_hex(std::string_view data);

// Length-prefixed field encoding for digest inputs: "name:len:bytes;".
// Unambiguous regardless of field content, so keys built from it cannot
// collide across requests that differ in any field.
void digest_field(std::string& buf, std::string_view name, std::string_view value);

// Canonical text form of a double for keying (17 significant digits).
std::string canonical_double(double v);

}  // namespace slick
