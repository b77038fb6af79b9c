#pragma once

// Public surface of the trusted core. Nothing declared here hands raw key
// bytes or plaintext payloads back to the caller; the key cache and sealed
// store live behind the gateway in src/trusted/.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "mqttz/crypto.hpp"
#include "mqttz/protocol.hpp"

namespace mqttz::trusted {

inline constexpr std::size_t kDefaultCacheCapacity = 64;

struct ReencryptTiming {
  double retrieve_dec_key_us = 0;
  double retrieve_enc_key_us = 0;
  double decrypt_us = 0;
  double encrypt_us = 0;
  double total_us = 0;
};

struct ReencryptResult {
  EncryptedEnvelope envelope;
  ReencryptTiming timing;
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t integrity_alarms = 0;
  std::size_t size = 0;
  std::size_t capacity = 0;
};

struct KeyProbe {
  bool hit = false;
  double lookup_us = 0;
};

struct TrustedConfig {
  std::filesystem::path store_dir;
  std::optional<crypto::HukSeed> huk_seed;
  std::size_t cache_capacity = kDefaultCacheCapacity;
  // Test instrumentation: sees every intermediate plaintext before it is wiped.
  std::function<void(ByteView)> plaintext_probe;
};

class TrustedCore;

// Serializing entry point into the trusted core. Every call is queued and
// executed one at a time, in FIFO order, on a dedicated worker thread; the
// caller blocks until its call completes. Errors thrown inside the core are
// rethrown to the caller unchanged.
class TrustedGateway {
 public:
  // Throws Error(MissingSeed) without a HUK seed, Error(StoreIo) if the store
  // directory or the sealed broker keypair cannot be used.
  explicit TrustedGateway(TrustedConfig config);
  ~TrustedGateway();

  TrustedGateway(const TrustedGateway&) = delete;
  TrustedGateway& operator=(const TrustedGateway&) = delete;

  // Unwraps the client key, stores it and returns the encrypted ACK
  // "MQTTZ-ACK:<client_id>".
  EncryptedEnvelope provision_key(const ClientId& client, const WrappedKey& wrapped);

  ReencryptResult reencrypt(const ClientId& origin, const ClientId& dest,
                            const EncryptedEnvelope& env);

  // Looks a key up through the cache (loading it on a miss) and reports
  // whether it was a hit and how long the lookup took.
  KeyProbe probe_key(const ClientId& client);

  CacheStats stats();
  void flush();

  const std::string& public_key_pem() const noexcept { return public_pem_; }
  std::uint64_t reencrypt_calls() const noexcept { return reencrypt_calls_.load(); }
  std::uint64_t provision_calls() const noexcept { return provision_calls_.load(); }

 private:
  template <typename F>
  auto call(F&& fn) -> decltype(fn(std::declval<TrustedCore&>()));
  void run();

  std::unique_ptr<TrustedCore> core_;
  std::string public_pem_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::atomic<std::uint64_t> reencrypt_calls_{0};
  std::atomic<std::uint64_t> provision_calls_{0};
  std::thread worker_;
};

}  // namespace mqttz::trusted
