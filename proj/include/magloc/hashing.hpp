#ifndef MAGLOC_HASHING_HPP
#define MAGLOC_HASHING_HPP

#include <string>

#include <openssl/evp.h>

#include "config_io.hpp"

namespace magloc {

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// Objects are dumped with sorted keys, so equal configs hash equally regardless of input order.
inline std::string config_hash(const FieldModelConfig& c) { return sha256_hex(config_to_json(c).dump()); }

}  // namespace magloc

#endif
