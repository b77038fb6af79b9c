#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mqttz/acl.hpp"
#include "mqttz/crypto.hpp"
#include "mqttz/event_log.hpp"
#include "mqttz/protocol.hpp"
#include "mqttz/transport.hpp"
#include "mqttz/trusted.hpp"

namespace mqttz {

// vanilla: plain TCP, envelopes forwarded untouched (baseline only)
// ree:     TLS, re-encryption done in the broker process with keys in memory
// tee:     TLS, re-encryption through the trusted gateway
enum class BrokerMode { Vanilla, Ree, Tee };

std::string_view broker_mode_name(BrokerMode mode) noexcept;
// Throws Error(InvalidArgument).
BrokerMode parse_broker_mode(std::string_view s);

// Where handshakes and re-encryptions are executed.
class KeyService {
 public:
  virtual ~KeyService() = default;
  virtual EncryptedEnvelope provision_key(const ClientId& client, const WrappedKey& wrapped) = 0;
  virtual trusted::ReencryptResult reencrypt(const ClientId& origin, const ClientId& dest,
                                             const EncryptedEnvelope& env) = 0;
  virtual std::string public_key_pem() const = 0;
  virtual std::uint64_t reencrypt_calls() const = 0;
};

class TrustedKeyService final : public KeyService {
 public:
  explicit TrustedKeyService(trusted::TrustedConfig config) : gateway_(std::move(config)) {}
  EncryptedEnvelope provision_key(const ClientId& client, const WrappedKey& wrapped) override {
    return gateway_.provision_key(client, wrapped);
  }
  trusted::ReencryptResult reencrypt(const ClientId& origin, const ClientId& dest,
                                     const EncryptedEnvelope& env) override {
    return gateway_.reencrypt(origin, dest, env);
  }
  std::string public_key_pem() const override { return gateway_.public_key_pem(); }
  std::uint64_t reencrypt_calls() const override { return gateway_.reencrypt_calls(); }
  trusted::TrustedGateway& gateway() noexcept { return gateway_; }

 private:
  trusted::TrustedGateway gateway_;
};

// Benchmark baseline: the same handshake and re-encryption steps executed in
// the untrusted process, with keys held in an ordinary map and no sealing.
class ReeKeyService final : public KeyService {
 public:
  ReeKeyService();
  EncryptedEnvelope provision_key(const ClientId& client, const WrappedKey& wrapped) override;
  trusted::ReencryptResult reencrypt(const ClientId& origin, const ClientId& dest,
                                     const EncryptedEnvelope& env) override;
  std::string public_key_pem() const override { return public_pem_; }
  std::uint64_t reencrypt_calls() const override { return reencrypt_calls_.load(); }

 private:
  crypto::BrokerKeyPair keypair_;
  std::string public_pem_;
  mutable std::shared_mutex mu_;
  std::unordered_map<ClientId, crypto::SymmetricKey> keys_;
  std::atomic<std::uint64_t> reencrypt_calls_{0};
};

struct BrokerConfig {
  net::Endpoint listen{"127.0.0.1", 8883};
  std::filesystem::path cert;
  std::filesystem::path key;
  std::filesystem::path acl;
  std::filesystem::path store_dir;
  std::size_t cache_capacity = trusted::kDefaultCacheCapacity;
  std::filesystem::path export_pubkey;
  BrokerMode mode = BrokerMode::Tee;
  std::optional<crypto::HukSeed> huk_seed;
  std::ostream* event_sink = nullptr;
};

struct BrokerHooks {
  // Sees every buffer the dispatch path handles, tagged with where it was seen.
  std::function<void(std::string_view stage, ByteView data)> dispatch_tap;
  // Extra instrumentation handed to the trusted core (tee mode).
  std::function<void(ByteView)> trusted_plaintext_probe;
};

struct BrokerCounters {
  std::uint64_t sessions_accepted = 0;
  std::uint64_t handshakes_ok = 0;
  std::uint64_t handshakes_failed = 0;
  std::uint64_t publishes_accepted = 0;
  std::uint64_t subscribes_accepted = 0;
  std::uint64_t rejected_before_handshake = 0;
  std::uint64_t denials = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t no_key_skips = 0;
};

class Broker {
 public:
  explicit Broker(BrokerConfig config, BrokerHooks hooks = {});
  ~Broker();

  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  // Loads the ACL, key service and TLS material, exports the public key and
  // starts accepting. Throws on any startup error.
  void start();
  // Closes every session, flushes the key cache and joins all threads.
  void stop();

  // Re-reads the ACL file. On a parse error the old table stays in force and
  // the error is rethrown.
  void reload_acl();

  std::uint16_t port() const noexcept { return port_; }
  KeyService& key_service() { return *keys_; }
  BrokerCounters counters() const;
  std::size_t session_count() const;
  std::vector<std::string> subscribers(std::string_view topic) const;

 private:
  struct Session;

  void accept_loop();
  void serve(std::shared_ptr<Session> session);
  void dispatch(Session& s, const Packet& pkt);
  void handle_connect(Session& s, const ConnectPacket& pkt);
  void handle_handshake(Session& s, const HandshakeReqPacket& pkt);
  void handle_subscribe(Session& s, const SubscribePacket& pkt);
  void handle_publish(Session& s, const PublishPacket& pkt);
  void reply(Session& s, const Packet& pkt);
  void reply_error(Session& s, ErrorCode code);
  void drop_session(Session& s);
  void tap(std::string_view stage, ByteView data);

  BrokerConfig config_;
  BrokerHooks hooks_;
  EventLog log_;
  std::unique_ptr<KeyService> keys_;
  std::unique_ptr<net::TlsServerContext> tls_;
  std::unique_ptr<net::Listener> listener_;
  std::uint16_t port_ = 0;

  mutable std::shared_mutex acl_mu_;
  AclTable acl_;

  mutable std::shared_mutex table_mu_;
  std::map<std::string, std::vector<std::string>, std::less<>> subscriptions_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;

  mutable std::mutex threads_mu_;
  std::vector<std::thread> session_threads_;
  std::vector<std::shared_ptr<Session>> live_;
  std::thread accept_thread_;
  std::atomic<bool> running_{false};

  mutable std::mutex counters_mu_;
  BrokerCounters counters_;
};

// Runs a broker until SIGINT/SIGTERM; SIGHUP reloads the ACL.
int run_broker(BrokerConfig config);

}  // namespace mqttz
