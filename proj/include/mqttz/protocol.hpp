#pragma once

// Binary wire format shared by clients and the broker.
//
// Frame layout:   kind (1 byte) | body length (4 bytes, big-endian) | body
// Strings:        2-byte big-endian length prefix followed by UTF-8 bytes
// Envelopes:      IV (16 bytes) | ciphertext (multiple of 16, >= 16 bytes)
//
// Body per kind:
//   CONNECT        client_id string
//   CONNACK        (empty)
//   SUBSCRIBE      topic string
//   SUBACK         topic string
//   PUBLISH        topic string | envelope (rest of body)
//   MESSAGE        topic string | envelope (rest of body)
//   HANDSHAKE_REQ  wrapped key, exactly 256 bytes
//   HANDSHAKE_ACK  envelope (whole body)
//   ERROR          1-byte code

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "mqttz/bytes.hpp"

namespace mqttz {

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::size_t kMaxBodySize = std::size_t{1} << 20;
inline constexpr std::size_t kMaxClientIdSize = 64;
inline constexpr std::size_t kMaxTopicSize = 256;
inline constexpr std::size_t kIvSize = 16;
inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::size_t kWrappedKeySize = 256;
inline constexpr std::string_view kHandshakeTopic = "mqttz/handshake";
// Plaintext of the handshake ACK is this prefix followed by the client id.
inline constexpr std::string_view kAckPrefix = "MQTTZ-ACK:";

enum class PacketKind : std::uint8_t {
  Connect = 0x01,
  ConnAck = 0x02,
  Subscribe = 0x03,
  SubAck = 0x04,
  Publish = 0x05,
  Message = 0x06,
  HandshakeReq = 0x07,
  HandshakeAck = 0x08,
  Error = 0x09,
};

enum class ErrorCode : std::uint8_t {
  Unauthorized = 1,
  Malformed = 2,
  NoKey = 3,
  Internal = 4,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class ClientId {
 public:
  // Throws Error(Malformed) unless 1..64 bytes of UTF-8 without '/', '#', '+'
  // or control characters.
  static ClientId parse(std::string_view value);

  const std::string& str() const noexcept { return value_; }
  auto operator<=>(const ClientId&) const = default;

 private:
  explicit ClientId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

class TopicName {
 public:
  const std::string& str() const noexcept { return value_; }
  bool reserved() const noexcept { return value_ == kHandshakeTopic; }
  auto operator<=>(const TopicName&) const = default;

 private:
  friend TopicName validate_topic(std::string_view s);
  explicit TopicName(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

// Throws Error(Malformed) on empty input, empty segments, leading/trailing
// '/', wildcard characters, control characters or invalid UTF-8. The reserved
// handshake topic is accepted and reported through TopicName::reserved().
TopicName validate_topic(std::string_view s);

bool is_valid_utf8(std::string_view s) noexcept;

struct EncryptedEnvelope {
  std::array<std::uint8_t, kIvSize> iv{};
  Bytes ciphertext;

  // Throws Error(Malformed) if the ciphertext length is zero or not a
  // multiple of the block size.
  void validate() const;
  std::size_t wire_size() const noexcept { return kIvSize + ciphertext.size(); }
  Bytes serialize() const;
  static EncryptedEnvelope parse(ByteView bytes);

  bool operator==(const EncryptedEnvelope&) const = default;
};

using WrappedKey = std::array<std::uint8_t, kWrappedKeySize>;

struct ConnectPacket {
  std::string client_id;
  bool operator==(const ConnectPacket&) const = default;
};
struct ConnAckPacket {
  bool operator==(const ConnAckPacket&) const = default;
};
struct SubscribePacket {
  std::string topic;
  bool operator==(const SubscribePacket&) const = default;
};
struct SubAckPacket {
  std::string topic;
  bool operator==(const SubAckPacket&) const = default;
};
struct PublishPacket {
  std::string topic;
  EncryptedEnvelope envelope;
  bool operator==(const PublishPacket&) const = default;
};
struct MessagePacket {
  std::string topic;
  EncryptedEnvelope envelope;
  bool operator==(const MessagePacket&) const = default;
};
struct HandshakeReqPacket {
  WrappedKey wrapped_key{};
  bool operator==(const HandshakeReqPacket&) const = default;
};
struct HandshakeAckPacket {
  EncryptedEnvelope envelope;
  bool operator==(const HandshakeAckPacket&) const = default;
};
struct ErrorPacket {
  ErrorCode code = ErrorCode::Internal;
  bool operator==(const ErrorPacket&) const = default;
};

using Packet = std::variant<ConnectPacket, ConnAckPacket, SubscribePacket, SubAckPacket,
                            PublishPacket, MessagePacket, HandshakeReqPacket,
                            HandshakeAckPacket, ErrorPacket>;

PacketKind packet_kind(const Packet& p) noexcept;
std::string_view packet_kind_name(PacketKind kind) noexcept;

// Throws Error(Malformed) on an invariant violation, Error(Oversize) when the
// body would exceed kMaxBodySize.
Bytes encode_packet(const Packet& p);

// Decodes exactly one complete frame. Throws Error(Malformed) on anything that
// is not a valid frame, including trailing bytes.
Packet decode_packet(ByteView frame);

// Incremental frame splitter for stream transports.
class FrameReader {
 public:
  void feed(ByteView data);

  // Returns the next complete frame's packet, or nullopt if more bytes are
  // needed. Throws Error(Malformed) as soon as a header announces an invalid
  // kind or an oversized body; after that the stream is unusable.
  std::optional<Packet> next();

  // Same as next() but also hands back the raw frame bytes.
  std::optional<std::pair<Packet, Bytes>> next_with_frame();

  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  std::optional<Bytes> take_frame();

  Bytes buffer_;
  std::size_t offset_ = 0;
};

}  // namespace mqttz

template <>
struct std::hash<mqttz::ClientId> {
  std::size_t operator()(const mqttz::ClientId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
