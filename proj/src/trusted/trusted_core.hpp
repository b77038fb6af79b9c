#pragma once

#include <string>

#include "lru_key_cache.hpp"
#include "mqttz/trusted.hpp"
#include "secure_store.hpp"

namespace mqttz::trusted {

inline constexpr std::string_view kKeypairRecord = "broker_keypair.sealed";
inline constexpr std::string_view kKeypairAd = "mqttz-broker-keypair";

// The trusted application. Not thread-safe: TrustedGateway is the only
// production caller and serializes all access.
class TrustedCore {
 public:
  explicit TrustedCore(TrustedConfig config);

  EncryptedEnvelope provision_key(const ClientId& client, const WrappedKey& wrapped);
  ReencryptResult reencrypt(const ClientId& origin, const ClientId& dest,
                            const EncryptedEnvelope& env);
  KeyProbe probe_key(const ClientId& client);

  // Cache tier with the store behind it. A miss unseals from the store and
  // inserts without re-sealing; a put seals the new key immediately. Either
  // way an eviction seals the victim before it leaves memory.
  // Throws Error(NoKey) if the key is in neither tier, Error(UnsealFailed) for
  // a corrupt record, Error(StoreIo) when sealing fails (state rolled back).
  crypto::SymmetricKey cache_get(const ClientId& id);
  void cache_put(const ClientId& id, const crypto::SymmetricKey& key);

  CacheStats stats() const;
  void flush();

  const std::string& public_key_pem() const noexcept { return public_pem_; }
  const SecureStore& store() const noexcept { return store_; }

 private:
  void insert(const ClientId& id, const crypto::SymmetricKey& key, bool write_through);
  static crypto::BrokerKeyPair load_or_create_keypair(SecureStore& store);

  TrustedConfig config_;
  SecureStore store_;
  LruKeyCache cache_;
  crypto::BrokerKeyPair keypair_;
  std::string public_pem_;
  std::uint64_t integrity_alarms_ = 0;
};

}  // namespace mqttz::trusted
