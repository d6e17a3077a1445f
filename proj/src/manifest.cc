#include "rcpose/manifest.h"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <memory>
#include <ostream>
#include <stdexcept>

namespace rcpose {

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha256: digest computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path &path) { return sha256_hex(read_text_file(path)); }

void RunManifest::add_input(const std::filesystem::path &path) {
    input_digests.emplace_back(path.generic_string(), sha256_file(path));
}

Json RunManifest::to_json() const {
    Json inputs = Json::array();
    for (const auto &[path, digest] : input_digests) inputs.push_back({{"path", path}, {"sha256", digest}});
    return Json{{"command", command},
                {"config", config},
                {"seed", seed},
                {"tool_version", tool_version},
                {"inputs", inputs},
                {"timestamp", timestamp ? Json(*timestamp) : Json(nullptr)}};
}

void write_manifest_line(std::ostream &out, const RunManifest &m) {
    out << Json{{"manifest", m.to_json()}}.dump() << '\n';
}

void write_manifest_comment(std::ostream &out, const RunManifest &m) { out << "# " << m.to_json().dump() << '\n'; }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace rcpose
