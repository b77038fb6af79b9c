#include "secure_store.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

#include "mqttz/error.hpp"

namespace mqttz::trusted {

namespace fs = std::filesystem;

SecureStore::SecureStore(fs::path dir, crypto::SymmetricKey storage_key)
    : dir_(std::move(dir)), storage_key_(std::move(storage_key)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw Error(Errc::StoreIo, "cannot create store directory " + dir_.string());
}

fs::path SecureStore::record_path(const ClientId& id) const {
  return dir_ / (to_hex(crypto::sha256(as_bytes(id.str()))) + ".sealed");
}

void SecureStore::write_record(const fs::path& path, ByteView plaintext, ByteView ad) {
  std::array<std::uint8_t, crypto::kGcmNonceSize> nonce{};
  crypto::random_bytes(nonce);
  auto sealed = crypto::gcm_seal(storage_key_, nonce, plaintext, ad);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::StoreIo, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(nonce.data()), nonce.size());
    out.write(reinterpret_cast<const char*>(sealed.data()),
              static_cast<std::streamsize>(sealed.size()));
    out.flush();
    if (!out) throw Error(Errc::StoreIo, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::StoreIo, "cannot rename record into place: " + path.string());
  }
  ++writes_;
}

Bytes SecureStore::read_record(const fs::path& path, ByteView ad) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::NotFound, "no sealed record at " + path.string());
  Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ++reads_;
  if (raw.size() < crypto::kGcmNonceSize + crypto::kGcmTagSize)
    throw Error(Errc::UnsealFailed, "truncated sealed record " + path.string());
  ByteView view(raw);
  return crypto::gcm_open(storage_key_, view.first(crypto::kGcmNonceSize),
                          view.subspan(crypto::kGcmNonceSize), ad);
}

void SecureStore::seal(const ClientId& id, const crypto::SymmetricKey& key) {
  write_record(record_path(id), key.bytes(), as_bytes(id.str()));
}

crypto::SymmetricKey SecureStore::unseal(const ClientId& id) const {
  auto plain = read_record(record_path(id), as_bytes(id.str()));
  if (plain.size() != crypto::kKeySize) {
    secure_wipe(plain);
    throw Error(Errc::UnsealFailed, "sealed record does not hold a 32-byte key");
  }
  auto key = crypto::SymmetricKey::from_bytes(plain);
  secure_wipe(plain);
  return key;
}

bool SecureStore::contains(const ClientId& id) const { return fs::exists(record_path(id)); }

void SecureStore::seal_blob(std::string_view name, ByteView ad, ByteView data) {
  write_record(dir_ / fs::path(std::string(name)), data, ad);
}

Bytes SecureStore::unseal_blob(std::string_view name, ByteView ad) const {
  return read_record(dir_ / fs::path(std::string(name)), ad);
}

bool SecureStore::contains_blob(std::string_view name) const {
  return fs::exists(dir_ / fs::path(std::string(name)));
}

}  // namespace mqttz::trusted
