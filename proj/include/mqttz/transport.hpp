#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "mqttz/bytes.hpp"
#include "mqttz/protocol.hpp"

using SSL = struct ssl_st;
using SSL_CTX = struct ssl_ctx_st;

namespace mqttz::net {

using Millis = std::chrono::milliseconds;

inline constexpr Millis kHandshakeTimeout{10'000};
inline constexpr Millis kWriteTimeout{10'000};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port"; throws Error(InvalidArgument).
  static Endpoint parse(std::string_view s);
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

class TlsServerContext {
 public:
  // Throws Error(Tls) if the certificate or key cannot be loaded.
  TlsServerContext(const std::filesystem::path& cert, const std::filesystem::path& key);
  ~TlsServerContext();
  TlsServerContext(const TlsServerContext&) = delete;
  TlsServerContext& operator=(const TlsServerContext&) = delete;
  SSL_CTX* get() const noexcept { return ctx_; }

 private:
  SSL_CTX* ctx_ = nullptr;
};

class TlsClientContext {
 public:
  // The broker certificate must chain to `trust_root`.
  explicit TlsClientContext(const std::filesystem::path& trust_root);
  ~TlsClientContext();
  TlsClientContext(const TlsClientContext&) = delete;
  TlsClientContext& operator=(const TlsClientContext&) = delete;
  SSL_CTX* get() const noexcept { return ctx_; }

 private:
  SSL_CTX* ctx_ = nullptr;
};

// A byte stream over TCP, optionally wrapped in TLS. One reader and any number
// of writers may use a connection concurrently.
class Connection {
 public:
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Throws Error(Closed) if the peer is gone, Error(Timeout) if the peer does
  // not drain its receive buffer within kWriteTimeout.
  void write_all(ByteView data);

  // Returns the number of bytes read, 0 on end of stream, nullopt on timeout.
  std::optional<std::size_t> read_some(std::span<std::uint8_t> buf,
                                       std::optional<Millis> timeout = std::nullopt);

  // Unblocks a concurrent reader and fails future writes.
  void shutdown() noexcept;

  bool is_tls() const noexcept { return ssl_ != nullptr; }
  std::uint64_t bytes_written() const noexcept { return bytes_written_.load(); }

 private:
  friend std::unique_ptr<Connection> accept_plain(int fd);
  friend std::unique_ptr<Connection> accept_tls(int fd, const TlsServerContext& ctx);
  friend std::unique_ptr<Connection> connect_plain(const Endpoint& ep);
  friend std::unique_ptr<Connection> connect_tls(const Endpoint& ep, const TlsClientContext& ctx);

  Connection(int fd, SSL* ssl) : fd_(fd), ssl_(ssl) {}
  bool wait(short events, std::optional<Millis> timeout);

  int fd_;
  SSL* ssl_;
  std::mutex mu_;
  std::atomic<bool> closed_{false};
  std::atomic<std::uint64_t> bytes_written_{0};
};

// Take ownership of an accepted socket.
std::unique_ptr<Connection> accept_plain(int fd);
std::unique_ptr<Connection> accept_tls(int fd, const TlsServerContext& ctx);

std::unique_ptr<Connection> connect_plain(const Endpoint& ep);
// Verifies the broker certificate chain and its host name or IP address.
std::unique_ptr<Connection> connect_tls(const Endpoint& ep, const TlsClientContext& ctx);

class Listener {
 public:
  // Port 0 picks an ephemeral port.
  explicit Listener(const Endpoint& ep);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  // Returns an accepted fd, or -1 on timeout.
  int accept(Millis timeout);
  void close() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Packet framing on top of a connection.
class PacketStream {
 public:
  explicit PacketStream(std::unique_ptr<Connection> conn) : conn_(std::move(conn)) {}

  void send(const Packet& p) { conn_->write_all(encode_packet(p)); }
  void send_frame(ByteView frame) { conn_->write_all(frame); }

  // nullopt on timeout. Throws Error(Closed) at end of stream and
  // Error(Malformed) on a bad frame.
  std::optional<Packet> receive(std::optional<Millis> timeout = std::nullopt);
  std::optional<std::pair<Packet, Bytes>> receive_frame(std::optional<Millis> timeout = std::nullopt);

  Connection& connection() noexcept { return *conn_; }

 private:
  std::unique_ptr<Connection> conn_;
  FrameReader reader_;
};

// Self-signed development certificate (P-256) valid for localhost and
// 127.0.0.1. The certificate doubles as the clients' trust root.
void generate_dev_certificate(const std::filesystem::path& cert_path,
                              const std::filesystem::path& key_path,
                              const std::string& common_name = "localhost");

}  // namespace mqttz::net
