#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "mqttz/bytes.hpp"
#include "mqttz/protocol.hpp"

using EVP_PKEY = struct evp_pkey_st;

namespace mqttz::crypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::string_view kStorageKeyInfo = "mqttz-secure-storage-v1";

// 32-byte AES-256 key. Memory is wiped on destruction.
class SymmetricKey {
 public:
  static SymmetricKey random();
  // Throws Error(InvalidArgument) unless exactly 32 bytes.
  static SymmetricKey from_bytes(ByteView bytes);
  static SymmetricKey from_hex(std::string_view hex);

  SymmetricKey(const SymmetricKey&) = default;
  SymmetricKey& operator=(const SymmetricKey&) = default;
  ~SymmetricKey();

  ByteView bytes() const noexcept { return bytes_; }
  std::string to_hex() const { return mqttz::to_hex(bytes_); }

  bool operator==(const SymmetricKey& other) const noexcept;

 private:
  SymmetricKey() = default;
  std::array<std::uint8_t, kKeySize> bytes_{};
};

struct HukSeed {
  std::array<std::uint8_t, 32> seed{};

  // Expects exactly 64 hex characters.
  static HukSeed from_hex(std::string_view hex);
};

void random_bytes(std::span<std::uint8_t> out);

// AES-256-CBC with a fresh random IV and PKCS#7 padding.
EncryptedEnvelope encrypt_payload(const SymmetricKey& key, ByteView plaintext);

// Throws Error(Malformed) for an invalid envelope and Error(BadPadding) when
// the final block does not unpad (wrong key or corrupted ciphertext).
Bytes decrypt_payload(const SymmetricKey& key, const EncryptedEnvelope& env);

inline std::size_t ciphertext_size(std::size_t plaintext_size) {
  return kBlockSize * ((plaintext_size + 1 + kBlockSize - 1) / kBlockSize);
}

class PublicKey {
 public:
  static PublicKey from_pem(std::string_view pem);
  static PublicKey load(const std::string& path);

  std::string to_pem() const;
  EVP_PKEY* get() const noexcept { return key_.get(); }

 private:
  struct Free {
    void operator()(EVP_PKEY* k) const noexcept;
  };
  explicit PublicKey(EVP_PKEY* k) : key_(k, Free{}) {}
  std::shared_ptr<EVP_PKEY> key_;
  friend class BrokerKeyPair;
};

// RSA-2048 keypair used to wrap client keys during the handshake.
class BrokerKeyPair {
 public:
  static BrokerKeyPair generate();
  static BrokerKeyPair from_private_pem(std::string_view pem);

  PublicKey public_key() const;
  std::string public_pem() const;
  // Only the trusted core calls this, to seal the keypair at rest.
  std::string private_pem() const;

  EVP_PKEY* get() const noexcept { return key_.get(); }

 private:
  explicit BrokerKeyPair(EVP_PKEY* k);
  std::shared_ptr<EVP_PKEY> key_;
};

// RSA-OAEP(SHA-256) of the 32 key bytes; always 256 bytes.
WrappedKey wrap_client_key(const PublicKey& pub, const SymmetricKey& key);

// Throws Error(UnwrapFailed) on OAEP failure or a payload that is not 32 bytes.
SymmetricKey unwrap_client_key(const BrokerKeyPair& priv, const WrappedKey& wrapped);

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

// HKDF-SHA-256(ikm=seed, salt=empty, info="mqttz-secure-storage-v1").
// Throws Error(MissingSeed) when no seed is configured.
SymmetricKey derive_storage_key(const std::optional<HukSeed>& seed);

std::array<std::uint8_t, 32> sha256(ByteView data);

inline constexpr std::size_t kGcmNonceSize = 12;
inline constexpr std::size_t kGcmTagSize = 16;

// AES-256-GCM. Output is ciphertext || tag.
Bytes gcm_seal(const SymmetricKey& key, ByteView nonce, ByteView plaintext, ByteView ad);
// Throws Error(UnsealFailed) on authentication failure.
Bytes gcm_open(const SymmetricKey& key, ByteView nonce, ByteView sealed, ByteView ad);

// Authenticated payload alternative, off by default and not used on the wire.
// Layout: nonce12 || ciphertext || tag16, with the topic as associated data.
Bytes seal_payload_aead(const SymmetricKey& key, ByteView plaintext, ByteView topic);
// Throws Error(UnsealFailed) on a forged, truncated or misrouted payload.
Bytes open_payload_aead(const SymmetricKey& key, ByteView sealed, ByteView topic);

}  // namespace mqttz::crypto
