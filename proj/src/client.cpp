#include "mqttz/client.hpp"

#include <fstream>
#include <sstream>

#include "mqttz/error.hpp"

namespace mqttz::client {
namespace {

using Clock = std::chrono::steady_clock;

std::string trimmed(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

crypto::SymmetricKey load_key_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot read key file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto hex = trimmed(ss.str());
  if (hex.size() != 2 * crypto::kKeySize)
    throw Error(Errc::InvalidArgument, "key file must hold 64 hex characters");
  return crypto::SymmetricKey::from_hex(hex);
}

Client::Client(ClientConfig config)
    : Client(config, config.key_file ? load_key_file(*config.key_file)
                                     : crypto::SymmetricKey::random()) {}

Client::Client(ClientConfig config, crypto::SymmetricKey key)
    : config_(std::move(config)), id_(ClientId::parse(config_.client_id)), key_(std::move(key)) {
  if (!config_.broker_pubkey.empty())
    broker_pub_ = crypto::PublicKey::load(config_.broker_pubkey.string());
}

Client::~Client() { close(); }

net::PacketStream& Client::stream() {
  if (!stream_) throw Error(Errc::Closed, "not connected");
  return *stream_;
}

void Client::connect(net::Millis timeout) {
  std::unique_ptr<net::Connection> conn;
  if (config_.plaintext_transport) {
    conn = net::connect_plain(config_.broker);
  } else {
    if (!tls_) tls_ = std::make_unique<net::TlsClientContext>(config_.trust_root);
    conn = net::connect_tls(config_.broker, *tls_);
  }
  stream_ = std::make_unique<net::PacketStream>(std::move(conn));
  stream_->send(ConnectPacket{id_.str()});

  auto deadline = Clock::now() + timeout;
  for (;;) {
    auto left = std::chrono::duration_cast<net::Millis>(deadline - Clock::now());
    if (left.count() <= 0) throw Error(Errc::Timeout, "no CONNACK");
    auto pkt = stream_->receive(left);
    if (!pkt) continue;
    if (std::holds_alternative<ConnAckPacket>(*pkt)) return;
    if (const auto* e = std::get_if<ErrorPacket>(&*pkt))
      throw Error(Errc::HandshakeRejected,
                  "connect refused: " + std::string(error_code_name(e->code)));
    throw Error(Errc::Malformed, "unexpected packet before CONNACK");
  }
}

void Client::perform_handshake(net::Millis timeout) {
  if (!broker_pub_) throw Error(Errc::InvalidArgument, "no broker public key configured");
  stream().send(HandshakeReqPacket{crypto::wrap_client_key(*broker_pub_, key_)});

  auto deadline = Clock::now() + timeout;
  for (;;) {
    auto left = std::chrono::duration_cast<net::Millis>(deadline - Clock::now());
    if (left.count() <= 0) throw Error(Errc::Timeout, "no HANDSHAKE_ACK");
    auto pkt = stream_->receive(left);
    if (!pkt) continue;
    if (const auto* e = std::get_if<ErrorPacket>(&*pkt))
      throw Error(Errc::HandshakeRejected,
                  "handshake refused: " + std::string(error_code_name(e->code)));
    const auto* ack = std::get_if<HandshakeAckPacket>(&*pkt);
    if (!ack) throw Error(Errc::Malformed, "unexpected packet during handshake");

    Bytes plain;
    try {
      plain = crypto::decrypt_payload(key_, ack->envelope);
    } catch (const Error&) {
      throw Error(Errc::AckMismatch, "ACK does not decrypt under the client key");
    }
    std::string expected = std::string(kAckPrefix) + id_.str();
    if (std::string(plain.begin(), plain.end()) != expected)
      throw Error(Errc::AckMismatch, "ACK is bound to another client");
    handshake_complete_ = true;
    return;
  }
}

void Client::establish(net::Millis timeout) {
  connect(timeout);
  perform_handshake(timeout);
}

void Client::publish(std::string_view topic, ByteView plaintext) {
  stream().send(PublishPacket{std::string(topic), crypto::encrypt_payload(key_, plaintext)});
}

std::optional<Packet> Client::pump(net::Millis timeout) {
  auto pkt = stream().receive(timeout);
  if (!pkt) return std::nullopt;
  if (auto* m = std::get_if<MessagePacket>(&*pkt)) {
    auto now = Clock::now();
    try {
      inbox_.push_back(Delivery{m->topic, crypto::decrypt_payload(key_, m->envelope), now});
    } catch (const Error& e) {
      if (e.code() != Errc::BadPadding) throw;
      ++bad_padding_;
    }
  } else if (const auto* e = std::get_if<ErrorPacket>(&*pkt)) {
    errors_.push_back(e->code);
  }
  return pkt;
}

void Client::subscribe(std::string_view topic, net::Millis timeout) {
  stream().send(SubscribePacket{std::string(topic)});
  auto deadline = Clock::now() + timeout;
  for (;;) {
    auto left = std::chrono::duration_cast<net::Millis>(deadline - Clock::now());
    if (left.count() <= 0) throw Error(Errc::Timeout, "no SUBACK");
    auto pkt = pump(left);
    if (!pkt) continue;
    if (const auto* ack = std::get_if<SubAckPacket>(&*pkt); ack && ack->topic == topic) return;
    if (const auto* e = std::get_if<ErrorPacket>(&*pkt)) {
      errors_.pop_back();
      throw Error(e->code == ErrorCode::Unauthorized ? Errc::Unauthorized : Errc::Malformed,
                  "subscribe refused: " + std::string(error_code_name(e->code)));
    }
  }
}

std::optional<Delivery> Client::next_delivery(net::Millis timeout) {
  auto deadline = Clock::now() + timeout;
  while (inbox_.empty()) {
    auto left = std::chrono::duration_cast<net::Millis>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    pump(left);
  }
  auto d = std::move(inbox_.front());
  inbox_.pop_front();
  return d;
}

void Client::subscribe_loop(std::string_view topic,
                            const std::function<bool(const Delivery&)>& sink) {
  subscribe(topic);
  try {
    for (;;) {
      auto d = next_delivery(net::Millis{1000});
      if (d && !sink(*d)) return;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::Closed) throw;
  }
}

void Client::close() noexcept {
  if (stream_) stream_->connection().shutdown();
}

std::vector<ErrorCode> Client::take_errors() { return std::exchange(errors_, {}); }

std::uint64_t Client::bytes_sent() const {
  return stream_ ? stream_->connection().bytes_written() : 0;
}

}  // namespace mqttz::client
