#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "mqttz/crypto.hpp"
#include "mqttz/protocol.hpp"

namespace mqttz::trusted {

// One AES-256-GCM sealed file per client:
//   <dir>/<hex(SHA-256(client_id))>.sealed = nonce (12) | ciphertext | tag (16)
// The client id is the associated data, so a record moved to another client's
// file name fails to open.
class SecureStore {
 public:
  SecureStore(std::filesystem::path dir, crypto::SymmetricKey storage_key);

  // Throws Error(StoreIo) if the record cannot be written.
  void seal(const ClientId& id, const crypto::SymmetricKey& key);

  // Throws Error(NotFound) if there is no record, Error(UnsealFailed) if it
  // does not authenticate.
  crypto::SymmetricKey unseal(const ClientId& id) const;

  bool contains(const ClientId& id) const;
  std::filesystem::path record_path(const ClientId& id) const;

  // Named blobs share the record format, with `ad` as associated data.
  void seal_blob(std::string_view name, ByteView ad, ByteView data);
  Bytes unseal_blob(std::string_view name, ByteView ad) const;
  bool contains_blob(std::string_view name) const;

  const std::filesystem::path& directory() const noexcept { return dir_; }
  std::uint64_t reads() const noexcept { return reads_; }
  std::uint64_t writes() const noexcept { return writes_; }

 private:
  void write_record(const std::filesystem::path& path, ByteView plaintext, ByteView ad);
  Bytes read_record(const std::filesystem::path& path, ByteView ad) const;

  std::filesystem::path dir_;
  crypto::SymmetricKey storage_key_;
  mutable std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
};

}  // namespace mqttz::trusted
