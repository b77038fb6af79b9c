#include <chrono>
#include <mutex>

#include "mqttz/broker.hpp"
#include "mqttz/error.hpp"

namespace mqttz {
namespace {

using Clock = std::chrono::steady_clock;

double micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

}  // namespace

ReeKeyService::ReeKeyService()
    : keypair_(crypto::BrokerKeyPair::generate()), public_pem_(keypair_.public_pem()) {}

EncryptedEnvelope ReeKeyService::provision_key(const ClientId& client, const WrappedKey& wrapped) {
  auto key = crypto::unwrap_client_key(keypair_, wrapped);
  std::string ack = std::string(kAckPrefix) + client.str();
  auto env = crypto::encrypt_payload(key, as_bytes(ack));
  std::unique_lock lock(mu_);
  keys_.insert_or_assign(client, std::move(key));
  return env;
}

trusted::ReencryptResult ReeKeyService::reencrypt(const ClientId& origin, const ClientId& dest,
                                                  const EncryptedEnvelope& env) {
  ++reencrypt_calls_;
  env.validate();
  auto fetch = [this](const ClientId& id) {
    std::shared_lock lock(mu_);
    auto it = keys_.find(id);
    if (it == keys_.end()) throw Error(Errc::NoKey, "no key for " + id.str());
    return it->second;
  };
  auto t0 = Clock::now();
  auto dec_key = fetch(origin);
  auto t1 = Clock::now();
  auto enc_key = fetch(dest);
  auto t2 = Clock::now();
  Bytes plaintext = crypto::decrypt_payload(dec_key, env);
  auto t3 = Clock::now();
  trusted::ReencryptResult result{crypto::encrypt_payload(enc_key, plaintext), {}};
  auto t4 = Clock::now();
  secure_wipe(plaintext);

  result.timing.retrieve_dec_key_us = micros(t0, t1);
  result.timing.retrieve_enc_key_us = micros(t1, t2);
  result.timing.decrypt_us = micros(t2, t3);
  result.timing.encrypt_us = micros(t3, t4);
  result.timing.total_us = micros(t0, t4);
  return result;
}

}  // namespace mqttz
