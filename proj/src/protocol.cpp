#include "mqttz/protocol.hpp"

#include <algorithm>

#include "mqttz/error.hpp"

namespace mqttz {
namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::Malformed, what); }

bool has_control_char(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7f;
  });
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    u16(static_cast<std::uint16_t>(s.size()));
    raw(as_bytes(s));
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    auto n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    if (!is_valid_utf8(s)) malformed("string is not valid UTF-8");
    return s;
  }
  ByteView rest() {
    auto r = data_.subspan(pos_);
    pos_ = data_.size();
    return r;
  }
  void finish() const {
    if (pos_ != data_.size()) malformed("trailing bytes in body");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) malformed("truncated body");
  }
  ByteView data_;
  std::size_t pos_ = 0;
};

bool known_kind(std::uint8_t k) { return k >= 0x01 && k <= 0x09; }

void check_topic(std::string_view topic) { (void)validate_topic(topic); }
void check_client_id(std::string_view id) { (void)ClientId::parse(id); }

}  // namespace

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Unauthorized: return "UNAUTHORIZED";
    case ErrorCode::Malformed: return "MALFORMED";
    case ErrorCode::NoKey: return "NO_KEY";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

bool is_valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = cp << 6 | (cc & 0x3f);
    }
    // overlong encodings, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000))
      return false;
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += len;
  }
  return true;
}

ClientId ClientId::parse(std::string_view value) {
  if (value.empty() || value.size() > kMaxClientIdSize)
    malformed("client id must be 1..64 bytes");
  if (!is_valid_utf8(value)) malformed("client id is not valid UTF-8");
  if (value.find_first_of("/#+") != std::string_view::npos)
    malformed("client id contains a reserved character");
  if (has_control_char(value)) malformed("client id contains a control character");
  return ClientId(std::string(value));
}

TopicName validate_topic(std::string_view s) {
  if (s.empty() || s.size() > kMaxTopicSize) malformed("topic must be 1..256 bytes");
  if (!is_valid_utf8(s)) malformed("topic is not valid UTF-8");
  if (has_control_char(s)) malformed("topic contains a control character");
  if (s.find_first_of("#+") != std::string_view::npos)
    malformed("wildcards are not allowed in topic names");
  if (s.front() == '/' || s.back() == '/') malformed("leading or trailing '/'");
  if (s.find("//") != std::string_view::npos) malformed("empty topic segment");
  return TopicName(std::string(s));
}

void EncryptedEnvelope::validate() const {
  if (ciphertext.empty() || ciphertext.size() % kBlockSize != 0)
    malformed("envelope ciphertext length must be a positive multiple of 16");
}

Bytes EncryptedEnvelope::serialize() const {
  Bytes out;
  out.reserve(wire_size());
  out.insert(out.end(), iv.begin(), iv.end());
  out.insert(out.end(), ciphertext.begin(), ciphertext.end());
  return out;
}

EncryptedEnvelope EncryptedEnvelope::parse(ByteView bytes) {
  if (bytes.size() < kIvSize) malformed("envelope shorter than IV");
  EncryptedEnvelope env;
  std::copy_n(bytes.begin(), kIvSize, env.iv.begin());
  env.ciphertext.assign(bytes.begin() + kIvSize, bytes.end());
  env.validate();
  return env;
}

PacketKind packet_kind(const Packet& p) noexcept {
  return static_cast<PacketKind>(p.index() + 1);
}

std::string_view packet_kind_name(PacketKind kind) noexcept {
  switch (kind) {
    case PacketKind::Connect: return "CONNECT";
    case PacketKind::ConnAck: return "CONNACK";
    case PacketKind::Subscribe: return "SUBSCRIBE";
    case PacketKind::SubAck: return "SUBACK";
    case PacketKind::Publish: return "PUBLISH";
    case PacketKind::Message: return "MESSAGE";
    case PacketKind::HandshakeReq: return "HANDSHAKE_REQ";
    case PacketKind::HandshakeAck: return "HANDSHAKE_ACK";
    case PacketKind::Error: return "ERROR";
  }
  return "UNKNOWN";
}

Bytes encode_packet(const Packet& p) {
  Writer body;
  auto topic_and_envelope = [&](const std::string& topic, const EncryptedEnvelope& env) {
    check_topic(topic);
    env.validate();
    body.str(topic);
    body.raw(env.iv);
    body.raw(env.ciphertext);
  };

  std::visit(
      [&](const auto& pkt) {
        using T = std::decay_t<decltype(pkt)>;
        if constexpr (std::is_same_v<T, ConnectPacket>) {
          check_client_id(pkt.client_id);
          body.str(pkt.client_id);
        } else if constexpr (std::is_same_v<T, ConnAckPacket>) {
        } else if constexpr (std::is_same_v<T, SubscribePacket> ||
                             std::is_same_v<T, SubAckPacket>) {
          check_topic(pkt.topic);
          body.str(pkt.topic);
        } else if constexpr (std::is_same_v<T, PublishPacket> ||
                             std::is_same_v<T, MessagePacket>) {
          topic_and_envelope(pkt.topic, pkt.envelope);
        } else if constexpr (std::is_same_v<T, HandshakeReqPacket>) {
          body.raw(pkt.wrapped_key);
        } else if constexpr (std::is_same_v<T, HandshakeAckPacket>) {
          pkt.envelope.validate();
          body.raw(pkt.envelope.iv);
          body.raw(pkt.envelope.ciphertext);
        } else if constexpr (std::is_same_v<T, ErrorPacket>) {
          auto c = static_cast<std::uint8_t>(pkt.code);
          if (c < 1 || c > 4) malformed("unknown error code");
          body.u8(c);
        }
      },
      p);

  Bytes b = body.take();
  if (b.size() > kMaxBodySize) throw Error(Errc::Oversize, "packet body exceeds 1 MiB");

  Bytes frame;
  frame.reserve(kFrameHeaderSize + b.size());
  frame.push_back(static_cast<std::uint8_t>(packet_kind(p)));
  auto n = static_cast<std::uint32_t>(b.size());
  frame.push_back(static_cast<std::uint8_t>(n >> 24));
  frame.push_back(static_cast<std::uint8_t>(n >> 16));
  frame.push_back(static_cast<std::uint8_t>(n >> 8));
  frame.push_back(static_cast<std::uint8_t>(n));
  frame.insert(frame.end(), b.begin(), b.end());
  return frame;
}

namespace {

std::uint32_t read_be32(ByteView b) {
  return std::uint32_t{b[0]} << 24 | std::uint32_t{b[1]} << 16 | std::uint32_t{b[2]} << 8 |
         std::uint32_t{b[3]};
}

Packet decode_body(PacketKind kind, ByteView body) {
  Reader r(body);
  switch (kind) {
    case PacketKind::Connect: {
      auto id = r.str();
      r.finish();
      check_client_id(id);
      return ConnectPacket{std::move(id)};
    }
    case PacketKind::ConnAck:
      r.finish();
      return ConnAckPacket{};
    case PacketKind::Subscribe:
    case PacketKind::SubAck: {
      auto topic = r.str();
      r.finish();
      check_topic(topic);
      if (kind == PacketKind::Subscribe) return SubscribePacket{std::move(topic)};
      return SubAckPacket{std::move(topic)};
    }
    case PacketKind::Publish:
    case PacketKind::Message: {
      auto topic = r.str();
      check_topic(topic);
      auto env = EncryptedEnvelope::parse(r.rest());
      if (kind == PacketKind::Publish) return PublishPacket{std::move(topic), std::move(env)};
      return MessagePacket{std::move(topic), std::move(env)};
    }
    case PacketKind::HandshakeReq: {
      if (body.size() != kWrappedKeySize) malformed("wrapped key must be 256 bytes");
      HandshakeReqPacket p;
      std::copy(body.begin(), body.end(), p.wrapped_key.begin());
      return p;
    }
    case PacketKind::HandshakeAck:
      return HandshakeAckPacket{EncryptedEnvelope::parse(body)};
    case PacketKind::Error: {
      auto c = r.u8();
      r.finish();
      if (c < 1 || c > 4) malformed("unknown error code");
      return ErrorPacket{static_cast<ErrorCode>(c)};
    }
  }
  malformed("unknown packet kind");
}

}  // namespace

Packet decode_packet(ByteView frame) {
  if (frame.size() < kFrameHeaderSize) malformed("truncated frame header");
  if (!known_kind(frame[0])) malformed("unknown packet kind");
  auto n = read_be32(frame.subspan(1, 4));
  if (n > kMaxBodySize) malformed("body length exceeds 1 MiB");
  if (frame.size() != kFrameHeaderSize + n) malformed("frame length mismatch");
  return decode_body(static_cast<PacketKind>(frame[0]), frame.subspan(kFrameHeaderSize));
}

void FrameReader::feed(ByteView data) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (1u << 16) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

std::optional<Bytes> FrameReader::take_frame() {
  ByteView avail(buffer_.data() + offset_, buffer_.size() - offset_);
  if (avail.empty()) return std::nullopt;
  if (!known_kind(avail[0])) malformed("unknown packet kind");
  if (avail.size() < kFrameHeaderSize) return std::nullopt;
  auto n = read_be32(avail.subspan(1, 4));
  if (n > kMaxBodySize) malformed("body length exceeds 1 MiB");
  if (avail.size() < kFrameHeaderSize + n) return std::nullopt;
  Bytes frame(avail.begin(), avail.begin() + kFrameHeaderSize + n);
  offset_ += frame.size();
  return frame;
}

std::optional<Packet> FrameReader::next() {
  auto frame = take_frame();
  if (!frame) return std::nullopt;
  return decode_packet(*frame);
}

std::optional<std::pair<Packet, Bytes>> FrameReader::next_with_frame() {
  auto frame = take_frame();
  if (!frame) return std::nullopt;
  auto pkt = decode_packet(*frame);
  return std::pair{std::move(pkt), std::move(*frame)};
}

}  // namespace mqttz
