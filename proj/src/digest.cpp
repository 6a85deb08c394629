#include "slick/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace slick {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int md_len = 0;
  EVP_Digest(data.data(), data.size(), md.data(), &md_len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(md_len * 2);
  for (unsigned int i = 0; i < md_len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

void digest_field(std::string& buf, std::string_view name, std::string_view value) {
  buf.append(name);
  buf.push_back(':');
  buf.append(std::to_string(value.size()));
  buf.push_back(':');
  buf.append(value);
  buf.push_back(';');
}

std::string canonical_double(double v) {
  char tmp[64];
  std::snprintf(tmp, sizeof(tmp), "%.17g", v);
  return tmp;
}

}  // namespace slick
