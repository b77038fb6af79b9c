#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mqttz/crypto.hpp"
#include "mqttz/protocol.hpp"
#include "mqttz/transport.hpp"

namespace mqttz::client {

struct ClientConfig {
  net::Endpoint broker{"127.0.0.1", 8883};
  std::filesystem::path broker_pubkey;
  std::string client_id;
  // 64 hex characters; a fresh random key is generated when unset.
  std::optional<std::filesystem::path> key_file;
  std::filesystem::path trust_root;
  // Only for the vanilla baseline broker.
  bool plaintext_transport = false;
};

struct Delivery {
  std::string topic;
  Bytes plaintext;
  std::chrono::steady_clock::time_point received;
};

class Client {
 public:
  // Loads the broker public key and the client key. Throws Error(Malformed)
  // for a bad client id, Error(InvalidArgument) for a bad key file.
  explicit Client(ClientConfig config);
  // Same, with the key supplied directly.
  Client(ClientConfig config, crypto::SymmetricKey key);
  ~Client();

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  // Opens the transport and exchanges CONNECT/CONNACK.
  // Throws Error(HandshakeRejected) if the broker answers with an ERROR.
  void connect(net::Millis timeout = net::Millis{10'000});

  // Sends the wrapped key and verifies the encrypted ACK.
  // Throws Error(HandshakeRejected) or Error(AckMismatch).
  void perform_handshake(net::Millis timeout = net::Millis{10'000});

  // connect() followed by perform_handshake().
  void establish(net::Millis timeout = net::Millis{10'000});

  void publish(std::string_view topic, ByteView plaintext);

  // Waits for the SUBACK. Messages arriving meanwhile are queued.
  // Throws Error(Unauthorized) if the broker refuses.
  void subscribe(std::string_view topic, net::Millis timeout = net::Millis{10'000});

  // Next decrypted message, or nullopt on timeout. Messages that fail to
  // decrypt are counted and skipped; broker ERROR packets are recorded.
  std::optional<Delivery> next_delivery(net::Millis timeout);

  // Delivers messages to `sink` until it returns false or the session ends.
  void subscribe_loop(std::string_view topic, const std::function<bool(const Delivery&)>& sink);

  void close() noexcept;

  const ClientId& id() const noexcept { return id_; }
  const crypto::SymmetricKey& key() const noexcept { return key_; }
  bool handshake_complete() const noexcept { return handshake_complete_; }
  std::uint64_t bad_padding_count() const noexcept { return bad_padding_; }
  // ERROR codes received from the broker, oldest first.
  std::vector<ErrorCode> take_errors();
  std::uint64_t bytes_sent() const;

 private:
  // Reads one packet. Messages are decrypted and queued; errors recorded.
  std::optional<Packet> pump(net::Millis timeout);
  net::PacketStream& stream();

  ClientConfig config_;
  ClientId id_;
  crypto::SymmetricKey key_;
  std::optional<crypto::PublicKey> broker_pub_;
  std::unique_ptr<net::TlsClientContext> tls_;
  std::unique_ptr<net::PacketStream> stream_;
  bool handshake_complete_ = false;
  std::uint64_t bad_padding_ = 0;
  std::deque<Delivery> inbox_;
  std::vector<ErrorCode> errors_;
};

// Reads a 64-hex-character key file. Throws Error(InvalidArgument).
crypto::SymmetricKey load_key_file(const std::filesystem::path& path);

}  // namespace mqttz::client
