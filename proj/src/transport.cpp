#include "mqttz/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstring>
#include <fstream>

#include <openssl/err.h>
#include <openssl/pem.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>

#include "mqttz/error.hpp"

namespace mqttz::net {
namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string ssl_error_string() {
  unsigned long e = ERR_get_error();
  if (e == 0) return "unknown TLS error";
  char buf[256];
  ERR_error_string_n(e, buf, sizeof buf);
  ERR_clear_error();
  return buf;
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0)
    throw Error(Errc::Io, "cannot set O_NONBLOCK");
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::optional<Millis> remaining(std::optional<Clock::time_point> deadline) {
  if (!deadline) return std::nullopt;
  auto left = std::chrono::duration_cast<Millis>(*deadline - Clock::now());
  return left.count() < 0 ? Millis{0} : left;
}

bool poll_fd(int fd, short events, std::optional<Millis> timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    int rc = ::poll(&p, 1, timeout ? static_cast<int>(timeout->count()) : -1);
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw Error(Errc::Io, std::string("poll: ") + std::strerror(errno));
  }
}

// Drives SSL_accept / SSL_connect on a non-blocking socket.
template <typename Step>
void drive_handshake(SSL* ssl, int fd, Step step) {
  auto deadline = Clock::now() + kHandshakeTimeout;
  for (;;) {
    int rc = step(ssl);
    if (rc == 1) return;
    int err = SSL_get_error(ssl, rc);
    short events;
    if (err == SSL_ERROR_WANT_READ) {
      events = POLLIN;
    } else if (err == SSL_ERROR_WANT_WRITE) {
      events = POLLOUT;
    } else {
      throw Error(Errc::Tls, "TLS handshake failed: " + ssl_error_string());
    }
    if (!poll_fd(fd, events, remaining(deadline)))
      throw Error(Errc::Timeout, "TLS handshake timed out");
  }
}

int dial(const Endpoint& ep) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port = std::to_string(ep.port);
  if (int rc = getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw Error(Errc::Io, "cannot resolve " + ep.host + ": " + gai_strerror(rc));
  int fd = -1;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw Error(Errc::Io, "cannot connect to " + ep.to_string());
  set_nonblocking(fd);
  return fd;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view s) {
  auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == s.size())
    throw Error(Errc::InvalidArgument, "expected host:port, got '" + std::string(s) + "'");
  Endpoint ep;
  ep.host = std::string(s.substr(0, colon));
  if (ep.host.empty()) ep.host = "0.0.0.0";
  int port = 0;
  try {
    port = std::stoi(std::string(s.substr(colon + 1)));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(Errc::InvalidArgument, "invalid port in '" + std::string(s) + "'");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

TlsServerContext::TlsServerContext(const std::filesystem::path& cert,
                                   const std::filesystem::path& key) {
  ctx_ = SSL_CTX_new(TLS_server_method());
  if (!ctx_) throw Error(Errc::Tls, "SSL_CTX_new failed");
  SSL_CTX_set_min_proto_version(ctx_, TLS1_2_VERSION);
  SSL_CTX_set_mode(ctx_, SSL_MODE_ENABLE_PARTIAL_WRITE | SSL_MODE_ACCEPT_MOVING_WRITE_BUFFER);
  if (SSL_CTX_use_certificate_chain_file(ctx_, cert.c_str()) != 1 ||
      SSL_CTX_use_PrivateKey_file(ctx_, key.c_str(), SSL_FILETYPE_PEM) != 1 ||
      SSL_CTX_check_private_key(ctx_) != 1) {
    auto msg = ssl_error_string();
    SSL_CTX_free(ctx_);
    throw Error(Errc::Tls, "cannot load TLS material (" + cert.string() + ", " + key.string() +
                               "): " + msg);
  }
}

TlsServerContext::~TlsServerContext() { SSL_CTX_free(ctx_); }

TlsClientContext::TlsClientContext(const std::filesystem::path& trust_root) {
  ctx_ = SSL_CTX_new(TLS_client_method());
  if (!ctx_) throw Error(Errc::Tls, "SSL_CTX_new failed");
  SSL_CTX_set_min_proto_version(ctx_, TLS1_2_VERSION);
  SSL_CTX_set_mode(ctx_, SSL_MODE_ENABLE_PARTIAL_WRITE | SSL_MODE_ACCEPT_MOVING_WRITE_BUFFER);
  SSL_CTX_set_verify(ctx_, SSL_VERIFY_PEER, nullptr);
  if (SSL_CTX_load_verify_locations(ctx_, trust_root.c_str(), nullptr) != 1) {
    auto msg = ssl_error_string();
    SSL_CTX_free(ctx_);
    throw Error(Errc::Tls, "cannot load trust root " + trust_root.string() + ": " + msg);
  }
}

TlsClientContext::~TlsClientContext() { SSL_CTX_free(ctx_); }

Connection::~Connection() {
  if (ssl_) SSL_free(ssl_);
  ::close(fd_);
}

bool Connection::wait(short events, std::optional<Millis> timeout) {
  return poll_fd(fd_, events, timeout);
}

void Connection::shutdown() noexcept {
  closed_ = true;
  ::shutdown(fd_, SHUT_RDWR);
}

void Connection::write_all(ByteView data) {
  std::lock_guard lock(mu_);
  auto deadline = Clock::now() + kWriteTimeout;
  std::size_t off = 0;
  while (off < data.size()) {
    if (closed_) throw Error(Errc::Closed, "connection closed");
    short events = POLLOUT;
    if (ssl_) {
      std::size_t chunk = std::min<std::size_t>(data.size() - off, 1 << 30);
      int n = SSL_write(ssl_, data.data() + off, static_cast<int>(chunk));
      if (n > 0) {
        off += static_cast<std::size_t>(n);
        continue;
      }
      int err = SSL_get_error(ssl_, n);
      if (err == SSL_ERROR_WANT_READ) {
        events = POLLIN;
      } else if (err != SSL_ERROR_WANT_WRITE) {
        ERR_clear_error();
        throw Error(Errc::Closed, "TLS write failed");
      }
    } else {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n > 0) {
        off += static_cast<std::size_t>(n);
        continue;
      }
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)
        throw Error(Errc::Closed, std::string("send: ") + std::strerror(errno));
    }
    if (!wait(events, remaining(deadline))) throw Error(Errc::Timeout, "write timed out");
  }
  bytes_written_ += data.size();
}

std::optional<std::size_t> Connection::read_some(std::span<std::uint8_t> buf,
                                                 std::optional<Millis> timeout) {
  std::optional<Clock::time_point> deadline;
  if (timeout) deadline = Clock::now() + *timeout;
  for (;;) {
    short events = POLLIN;
    {
      std::lock_guard lock(mu_);
      if (closed_) return 0;
      if (ssl_) {
        int n = SSL_read(ssl_, buf.data(), static_cast<int>(std::min<std::size_t>(buf.size(), 1 << 30)));
        if (n > 0) return static_cast<std::size_t>(n);
        int err = SSL_get_error(ssl_, n);
        if (err == SSL_ERROR_WANT_WRITE) {
          events = POLLOUT;
        } else if (err != SSL_ERROR_WANT_READ) {
          // close_notify, reset or protocol error: the stream is over either way
          ERR_clear_error();
          return 0;
        }
      } else {
        ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n > 0) return static_cast<std::size_t>(n);
        if (n == 0) return 0;
        if (errno == EINTR) continue;
        if (errno != EAGAIN && errno != EWOULDBLOCK) return 0;
      }
    }
    if (!wait(events, remaining(deadline))) return std::nullopt;
  }
}

std::unique_ptr<Connection> accept_plain(int fd) {
  ignore_sigpipe();
  set_nonblocking(fd);
  return std::unique_ptr<Connection>(new Connection(fd, nullptr));
}

std::unique_ptr<Connection> accept_tls(int fd, const TlsServerContext& ctx) {
  ignore_sigpipe();
  try {
    set_nonblocking(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  SSL* ssl = SSL_new(ctx.get());
  if (!ssl) {
    ::close(fd);
    throw Error(Errc::Tls, "SSL_new failed");
  }
  std::unique_ptr<Connection> conn(new Connection(fd, ssl));
  SSL_set_fd(ssl, fd);
  drive_handshake(ssl, fd, [](SSL* s) { return SSL_accept(s); });
  return conn;
}

std::unique_ptr<Connection> connect_plain(const Endpoint& ep) {
  return std::unique_ptr<Connection>(new Connection(dial(ep), nullptr));
}

std::unique_ptr<Connection> connect_tls(const Endpoint& ep, const TlsClientContext& ctx) {
  int fd = dial(ep);
  SSL* ssl = SSL_new(ctx.get());
  if (!ssl) {
    ::close(fd);
    throw Error(Errc::Tls, "SSL_new failed");
  }
  std::unique_ptr<Connection> conn(new Connection(fd, ssl));
  SSL_set_fd(ssl, fd);
  X509_VERIFY_PARAM* param = SSL_get0_param(ssl);
  in6_addr probe{};
  bool is_ip = inet_pton(AF_INET, ep.host.c_str(), &probe) == 1 ||
               inet_pton(AF_INET6, ep.host.c_str(), &probe) == 1;
  if (is_ip) {
    X509_VERIFY_PARAM_set1_ip_asc(param, ep.host.c_str());
  } else {
    SSL_set_tlsext_host_name(ssl, ep.host.c_str());
    SSL_set1_host(ssl, ep.host.c_str());
  }
  drive_handshake(ssl, fd, [](SSL* s) { return SSL_connect(s); });
  if (SSL_get_verify_result(ssl) != X509_V_OK)
    throw Error(Errc::Tls, "broker certificate verification failed");
  return conn;
}

Listener::Listener(const Endpoint& ep) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  auto port = std::to_string(ep.port);
  if (int rc = getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw Error(Errc::Io, "cannot resolve listen address " + ep.host + ": " + gai_strerror(rc));
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd_, 128) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  freeaddrinfo(res);
  if (fd_ < 0) throw Error(Errc::Io, "cannot listen on " + ep.to_string());

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET)
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  else
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
}

Listener::~Listener() { close(); }

int Listener::accept(Millis timeout) {
  if (fd_ < 0) return -1;
  if (!poll_fd(fd_, POLLIN, timeout)) return -1;
  int fd = ::accept(fd_, nullptr, nullptr);
  return fd;
}

void Listener::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::optional<std::pair<Packet, Bytes>> PacketStream::receive_frame(std::optional<Millis> timeout) {
  std::optional<Clock::time_point> deadline;
  if (timeout) deadline = Clock::now() + *timeout;
  std::array<std::uint8_t, 16 * 1024> buf;
  for (;;) {
    if (auto f = reader_.next_with_frame()) return f;
    auto n = conn_->read_some(buf, remaining(deadline));
    if (!n) return std::nullopt;
    if (*n == 0) throw Error(Errc::Closed, "end of stream");
    reader_.feed(std::span(buf).first(*n));
  }
}

std::optional<Packet> PacketStream::receive(std::optional<Millis> timeout) {
  auto f = receive_frame(timeout);
  if (!f) return std::nullopt;
  return std::move(f->first);
}

void generate_dev_certificate(const std::filesystem::path& cert_path,
                              const std::filesystem::path& key_path,
                              const std::string& common_name) {
  EVP_PKEY* pkey = EVP_EC_gen("P-256");
  if (!pkey) throw Error(Errc::Tls, "EC key generation failed");
  X509* cert = X509_new();
  auto cleanup = [&] {
    X509_free(cert);
    EVP_PKEY_free(pkey);
  };
  try {
    X509_set_version(cert, 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert), static_cast<long>(std::time(nullptr)));
    X509_gmtime_adj(X509_getm_notBefore(cert), -3600);
    X509_gmtime_adj(X509_getm_notAfter(cert), 365L * 24 * 3600);
    X509_set_pubkey(cert, pkey);
    X509_NAME* name = X509_get_subject_name(cert);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>(common_name.c_str()), -1, -1, 0);
    X509_NAME_add_entry_by_txt(name, "O", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>("mqttz dev CA"), -1, -1, 0);
    X509_set_issuer_name(cert, name);

    X509V3_CTX v3;
    X509V3_set_ctx_nodb(&v3);
    X509V3_set_ctx(&v3, cert, cert, nullptr, nullptr, 0);
    std::string san = "DNS:" + common_name + ",DNS:localhost,IP:127.0.0.1,IP:::1";
    const std::pair<int, std::string> exts[] = {
        {NID_basic_constraints, "critical,CA:TRUE"},
        {NID_subject_key_identifier, "hash"},
        {NID_subject_alt_name, san},
    };
    for (const auto& [nid, value] : exts) {
      X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &v3, nid, value.c_str());
      if (!ext) throw Error(Errc::Tls, "cannot build certificate extension");
      X509_add_ext(cert, ext, -1);
      X509_EXTENSION_free(ext);
    }
    if (X509_sign(cert, pkey, EVP_sha256()) == 0) throw Error(Errc::Tls, "certificate signing failed");

    FILE* f = std::fopen(cert_path.c_str(), "wb");
    if (!f) throw Error(Errc::Io, "cannot write " + cert_path.string());
    PEM_write_X509(f, cert);
    std::fclose(f);
    f = std::fopen(key_path.c_str(), "wb");
    if (!f) throw Error(Errc::Io, "cannot write " + key_path.string());
    PEM_write_PrivateKey(f, pkey, nullptr, nullptr, 0, nullptr, nullptr);
    std::fclose(f);
  } catch (...) {
    cleanup();
    throw;
  }
  cleanup();
}

}  // namespace mqttz::net
