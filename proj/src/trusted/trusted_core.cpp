#include "trusted_core.hpp"

#include <chrono>

#include "mqttz/error.hpp"

namespace mqttz::trusted {
namespace {

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

}  // namespace

TrustedCore::TrustedCore(TrustedConfig config)
    : config_(std::move(config)),
      store_(config_.store_dir, crypto::derive_storage_key(config_.huk_seed)),
      cache_(config_.cache_capacity),
      keypair_(load_or_create_keypair(store_)),
      public_pem_(keypair_.public_pem()) {}

crypto::BrokerKeyPair TrustedCore::load_or_create_keypair(SecureStore& store) {
  if (store.contains_blob(kKeypairRecord)) {
    Bytes pem;
    try {
      pem = store.unseal_blob(kKeypairRecord, as_bytes(kKeypairAd));
    } catch (const Error& e) {
      throw Error(Errc::StoreIo, std::string("cannot unseal broker keypair: ") + e.what());
    }
    auto pair = crypto::BrokerKeyPair::from_private_pem(
        std::string_view(reinterpret_cast<const char*>(pem.data()), pem.size()));
    secure_wipe(pem);
    return pair;
  }
  auto pair = crypto::BrokerKeyPair::generate();
  auto pem = pair.private_pem();
  store.seal_blob(kKeypairRecord, as_bytes(kKeypairAd), as_bytes(pem));
  secure_wipe({reinterpret_cast<std::uint8_t*>(pem.data()), pem.size()});
  return pair;
}

void TrustedCore::insert(const ClientId& id, const crypto::SymmetricKey& key, bool write_through) {
  if (const auto* victim = cache_.victim_for(id)) store_.seal(victim->first, victim->second);
  if (write_through) store_.seal(id, key);
  cache_.insert(id, key);
}

crypto::SymmetricKey TrustedCore::cache_get(const ClientId& id) {
  if (const auto* key = cache_.lookup(id)) return *key;
  std::optional<crypto::SymmetricKey> loaded;
  try {
    loaded.emplace(store_.unseal(id));
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound) throw Error(Errc::NoKey, "no key for " + id.str());
    if (e.code() == Errc::UnsealFailed) ++integrity_alarms_;
    throw;
  }
  insert(id, *loaded, /*write_through=*/false);
  return *loaded;
}

void TrustedCore::cache_put(const ClientId& id, const crypto::SymmetricKey& key) {
  insert(id, key, /*write_through=*/true);
}

EncryptedEnvelope TrustedCore::provision_key(const ClientId& client, const WrappedKey& wrapped) {
  auto key = crypto::unwrap_client_key(keypair_, wrapped);
  cache_put(client, key);
  std::string ack = std::string(kAckPrefix) + client.str();
  return crypto::encrypt_payload(key, as_bytes(ack));
}

ReencryptResult TrustedCore::reencrypt(const ClientId& origin, const ClientId& dest,
                                       const EncryptedEnvelope& env) {
  env.validate();
  auto t0 = Clock::now();
  auto dec_key = cache_get(origin);
  auto t1 = Clock::now();
  auto enc_key = cache_get(dest);
  auto t2 = Clock::now();
  Bytes plaintext = crypto::decrypt_payload(dec_key, env);
  auto t3 = Clock::now();
  ReencryptResult result{crypto::encrypt_payload(enc_key, plaintext), {}};
  auto t4 = Clock::now();

  if (config_.plaintext_probe) config_.plaintext_probe(plaintext);
  secure_wipe(plaintext);

  result.timing.retrieve_dec_key_us = micros(t0, t1);
  result.timing.retrieve_enc_key_us = micros(t1, t2);
  result.timing.decrypt_us = micros(t2, t3);
  result.timing.encrypt_us = micros(t3, t4);
  result.timing.total_us = micros(t0, t4);
  return result;
}

KeyProbe TrustedCore::probe_key(const ClientId& client) {
  auto hits_before = cache_.hits();
  auto t0 = Clock::now();
  (void)cache_get(client);
  auto t1 = Clock::now();
  return KeyProbe{cache_.hits() > hits_before, micros(t0, t1)};
}

CacheStats TrustedCore::stats() const {
  return CacheStats{cache_.hits(),      cache_.misses(), cache_.evictions(), integrity_alarms_,
                    cache_.size(),      cache_.capacity()};
}

void TrustedCore::flush() {
  for (const auto& [id, key] : cache_.entries()) store_.seal(id, key);
}

}  // namespace mqttz::trusted
