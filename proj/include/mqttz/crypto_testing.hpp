#pragma once

// Known-answer test hooks. Not used by any production code path.

#include "mqttz/crypto.hpp"

namespace mqttz::crypto::testing {

EncryptedEnvelope encrypt_payload_with_iv(const SymmetricKey& key,
                                          const std::array<std::uint8_t, kIvSize>& iv,
                                          ByteView plaintext);

}  // namespace mqttz::crypto::testing
