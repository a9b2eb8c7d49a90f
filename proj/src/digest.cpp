#include "selfrefine/digest.hpp"

#include <openssl/evp.h>

#include "selfrefine/error.hpp"

namespace selfrefine {

std::string sha256_hex(std::string_view data) {
    unsigned char raw[EVP_MAX_MD_SIZE];
    unsigned int raw_len = 0;
    if (EVP_Digest(data.data(), data.size(), raw, &raw_len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Internal, "sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(raw_len * 2);
    for (unsigned int i = 0; i < raw_len; ++i) {
        out.push_back(hex[raw[i] >> 4]);
        out.push_back(hex[raw[i] & 0x0f]);
    }
    return out;
}

} // namespace selfrefine
