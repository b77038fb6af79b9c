#include "mqttz/trusted.hpp"

#include "trusted_core.hpp"

namespace mqttz::trusted {

TrustedGateway::TrustedGateway(TrustedConfig config) {
  // The core is built on the worker so that it never runs on any other thread.
  std::promise<void> ready;
  auto started = ready.get_future();
  worker_ = std::thread([this, cfg = std::move(config), &ready]() mutable {
    try {
      core_ = std::make_unique<TrustedCore>(std::move(cfg));
      public_pem_ = core_->public_key_pem();
    } catch (...) {
      ready.set_exception(std::current_exception());
      return;
    }
    ready.set_value();
    run();
  });
  try {
    started.get();
  } catch (...) {
    worker_.join();
    throw;
  }
}

TrustedGateway::~TrustedGateway() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void TrustedGateway::run() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) break;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
  core_.reset();
}

template <typename F>
auto TrustedGateway::call(F&& fn) -> decltype(fn(std::declval<TrustedCore&>())) {
  using R = decltype(fn(std::declval<TrustedCore&>()));
  std::packaged_task<R()> task([this, &fn] { return fn(*core_); });
  auto result = task.get_future();
  {
    std::lock_guard lock(mu_);
    queue_.emplace_back([&task] { task(); });
  }
  cv_.notify_one();
  return result.get();
}

EncryptedEnvelope TrustedGateway::provision_key(const ClientId& client, const WrappedKey& wrapped) {
  ++provision_calls_;
  return call([&](TrustedCore& core) { return core.provision_key(client, wrapped); });
}

ReencryptResult TrustedGateway::reencrypt(const ClientId& origin, const ClientId& dest,
                                          const EncryptedEnvelope& env) {
  ++reencrypt_calls_;
  return call([&](TrustedCore& core) { return core.reencrypt(origin, dest, env); });
}

KeyProbe TrustedGateway::probe_key(const ClientId& client) {
  return call([&](TrustedCore& core) { return core.probe_key(client); });
}

CacheStats TrustedGateway::stats() {
  return call([](TrustedCore& core) { return core.stats(); });
}

void TrustedGateway::flush() {
  call([](TrustedCore& core) { core.flush(); });
}

}  // namespace mqttz::trusted
