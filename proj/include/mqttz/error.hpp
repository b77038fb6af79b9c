#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mqttz {

enum class Errc {
  // protocol
  Malformed,
  Oversize,
  // crypto
  BadPadding,
  UnwrapFailed,
  MissingSeed,
  // trusted core
  NoKey,
  UnsealFailed,
  NotFound,
  StoreIo,
  // broker / client
  Unauthorized,
  ParseError,
  HandshakeRejected,
  AckMismatch,
  Internal,
  Io,
  Tls,
  Closed,
  Timeout,
  // bench
  Empty,
  Loss,
  InvalidArgument,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mqttz
