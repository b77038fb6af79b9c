#include "mqttz/bytes.hpp"
#include "mqttz/error.hpp"

#include <algorithm>

#include <openssl/crypto.h>

namespace mqttz {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::Malformed: return "MALFORMED";
    case Errc::Oversize: return "OVERSIZE";
    case Errc::BadPadding: return "BAD_PADDING";
    case Errc::UnwrapFailed: return "UNWRAP_FAILED";
    case Errc::MissingSeed: return "MISSING_SEED";
    case Errc::NoKey: return "NO_KEY";
    case Errc::UnsealFailed: return "UNSEAL_FAILED";
    case Errc::NotFound: return "NOT_FOUND";
    case Errc::StoreIo: return "STORE_IO";
    case Errc::Unauthorized: return "UNAUTHORIZED";
    case Errc::ParseError: return "PARSE_ERROR";
    case Errc::HandshakeRejected: return "HANDSHAKE_REJECTED";
    case Errc::AckMismatch: return "ACK_MISMATCH";
    case Errc::Internal: return "INTERNAL";
    case Errc::Io: return "IO";
    case Errc::Tls: return "TLS";
    case Errc::Closed: return "CLOSED";
    case Errc::Timeout: return "TIMEOUT";
    case Errc::Empty: return "EMPTY";
    case Errc::Loss: return "LOSS";
    case Errc::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::InvalidArgument, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::InvalidArgument, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

void secure_wipe(std::span<std::uint8_t> data) noexcept {
  if (!data.empty()) OPENSSL_cleanse(data.data(), data.size());
}

bool contains_subsequence(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace mqttz
