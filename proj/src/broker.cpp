#include "mqttz/broker.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>

#include "mqttz/error.hpp"

namespace mqttz {

std::string_view broker_mode_name(BrokerMode mode) noexcept {
  switch (mode) {
    case BrokerMode::Vanilla: return "vanilla";
    case BrokerMode::Ree: return "ree";
    case BrokerMode::Tee: return "tee";
  }
  return "unknown";
}

BrokerMode parse_broker_mode(std::string_view s) {
  if (s == "vanilla") return BrokerMode::Vanilla;
  if (s == "ree") return BrokerMode::Ree;
  if (s == "tee") return BrokerMode::Tee;
  throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

struct Broker::Session {
  explicit Session(int fd) : fd(fd) {}

  // Guards fd/stream against stop() racing the TLS accept.
  std::mutex io_mu;
  int fd;
  std::unique_ptr<net::PacketStream> stream;
  std::atomic<bool> finished{false};

  // Owned by the session thread.
  std::optional<ClientId> client;
  bool registered = false;
  bool handshake_complete = false;
  bool closing = false;
  std::set<std::string> topics;

  void send(const Packet& p) { stream->send(p); }
  void shutdown() {
    std::lock_guard lock(io_mu);
    if (stream)
      stream->connection().shutdown();
    else if (fd >= 0)
      ::shutdown(fd, SHUT_RDWR);
  }
};

Broker::Broker(BrokerConfig config, BrokerHooks hooks)
    : config_(std::move(config)), hooks_(std::move(hooks)), log_(config_.event_sink) {}

Broker::~Broker() { stop(); }

void Broker::start() {
  if (running_) return;
  acl_ = load_acl(config_.acl);

  if (config_.mode == BrokerMode::Tee) {
    trusted::TrustedConfig tc{config_.store_dir, config_.huk_seed, config_.cache_capacity,
                              hooks_.trusted_plaintext_probe};
    if (tc.store_dir.empty()) throw Error(Errc::InvalidArgument, "tee mode needs a store directory");
    keys_ = std::make_unique<TrustedKeyService>(std::move(tc));
  } else {
    keys_ = std::make_unique<ReeKeyService>();
  }

  if (!config_.export_pubkey.empty()) {
    std::ofstream out(config_.export_pubkey, std::ios::trunc);
    out << keys_->public_key_pem();
    if (!out) throw Error(Errc::Io, "cannot export public key to " + config_.export_pubkey.string());
  }

  if (config_.mode != BrokerMode::Vanilla)
    tls_ = std::make_unique<net::TlsServerContext>(config_.cert, config_.key);

  listener_ = std::make_unique<net::Listener>(config_.listen);
  port_ = listener_->port();
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  log_.emit("listening", {{"host", config_.listen.host},
                          {"port", port_},
                          {"mode", broker_mode_name(config_.mode)}});
}

void Broker::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  listener_->close();

  std::vector<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    for (auto& s : live_) s->shutdown();
    threads = std::move(session_threads_);
    live_.clear();
  }
  for (auto& t : threads) t.join();

  if (auto* tks = dynamic_cast<TrustedKeyService*>(keys_.get())) {
    try {
      tks->gateway().flush();
    } catch (const Error& e) {
      log_.emit("flush_failed", {{"error", e.what()}});
    }
  }
  log_.emit("stopped");
}

void Broker::reload_acl() {
  auto fresh = load_acl(config_.acl);
  {
    std::unique_lock lock(acl_mu_);
    acl_ = std::move(fresh);
  }
  log_.emit("acl_reload", {{"path", config_.acl.string()}});
}

BrokerCounters Broker::counters() const {
  std::lock_guard lock(counters_mu_);
  return counters_;
}

std::size_t Broker::session_count() const {
  std::shared_lock lock(table_mu_);
  return sessions_.size();
}

std::vector<std::string> Broker::subscribers(std::string_view topic) const {
  std::shared_lock lock(table_mu_);
  auto it = subscriptions_.find(topic);
  if (it == subscriptions_.end()) return {};
  return it->second;
}

void Broker::tap(std::string_view stage, ByteView data) {
  if (hooks_.dispatch_tap) hooks_.dispatch_tap(stage, data);
}

void Broker::accept_loop() {
  while (running_) {
    int fd = listener_->accept(net::Millis{100});
    if (fd < 0) continue;
    auto session = std::make_shared<Session>(fd);
    std::lock_guard lock(threads_mu_);
    // reap sessions that have ended
    for (std::size_t i = 0; i < live_.size();) {
      if (live_[i]->finished) {
        session_threads_[i].join();
        session_threads_.erase(session_threads_.begin() + static_cast<std::ptrdiff_t>(i));
        live_.erase(live_.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
    live_.push_back(session);
    session_threads_.emplace_back([this, session] { serve(session); });
  }
}

void Broker::serve(std::shared_ptr<Session> session) {
  Session& s = *session;
  try {
    std::unique_ptr<net::Connection> conn;
    if (tls_) {
      conn = net::accept_tls(s.fd, *tls_);
    } else {
      conn = net::accept_plain(s.fd);
    }
    std::lock_guard lock(s.io_mu);
    s.stream = std::make_unique<net::PacketStream>(std::move(conn));
  } catch (const Error& e) {
    {
      std::lock_guard lock(s.io_mu);
      s.fd = -1;  // closed by the failed connection
    }
    log_.emit("tls_failed", {{"error", e.what()}});
    s.finished = true;
    return;
  }
  {
    std::lock_guard lock(counters_mu_);
    ++counters_.sessions_accepted;
  }
  if (!running_) s.shutdown();

  try {
    while (!s.closing) {
      auto frame = s.stream->receive_frame();
      if (!frame) continue;
      tap("frame.in", frame->second);
      dispatch(s, frame->first);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::Malformed) {
      log_.emit("malformed", {{"client", s.client ? s.client->str() : ""}, {"error", e.what()}});
      try {
        reply_error(s, ErrorCode::Malformed);
      } catch (const Error&) {
      }
    } else if (e.code() != Errc::Closed) {
      log_.emit("session_error", {{"client", s.client ? s.client->str() : ""}, {"error", e.what()}});
    }
  }
  drop_session(s);
  s.shutdown();
  s.finished = true;
}

void Broker::reply(Session& s, const Packet& pkt) {
  auto frame = encode_packet(pkt);
  tap("frame.out", frame);
  s.stream->send_frame(frame);
}

void Broker::reply_error(Session& s, ErrorCode code) { reply(s, ErrorPacket{code}); }

void Broker::dispatch(Session& s, const Packet& pkt) {
  if (const auto* c = std::get_if<ConnectPacket>(&pkt)) return handle_connect(s, *c);

  if (!s.client) {
    auto kind = packet_kind(pkt);
    if (kind == PacketKind::Publish || kind == PacketKind::Subscribe) {
      std::lock_guard lock(counters_mu_);
      ++counters_.rejected_before_handshake;
    }
    return reply_error(s, kind == PacketKind::Publish || kind == PacketKind::Subscribe
                              ? ErrorCode::Unauthorized
                              : ErrorCode::Malformed);
  }

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, HandshakeReqPacket>) {
          handle_handshake(s, p);
        } else if constexpr (std::is_same_v<T, SubscribePacket>) {
          handle_subscribe(s, p);
        } else if constexpr (std::is_same_v<T, PublishPacket>) {
          handle_publish(s, p);
        } else if constexpr (!std::is_same_v<T, ConnectPacket>) {
          reply_error(s, ErrorCode::Malformed);
        }
      },
      pkt);
}

void Broker::handle_connect(Session& s, const ConnectPacket& pkt) {
  if (s.client) return reply_error(s, ErrorCode::Malformed);
  auto id = ClientId::parse(pkt.client_id);
  {
    std::unique_lock lock(table_mu_);
    if (sessions_.count(id.str())) {
      lock.unlock();
      log_.emit("duplicate_connect", {{"client", id.str()}});
      reply_error(s, ErrorCode::Unauthorized);
      s.closing = true;
      return;
    }
    // find the shared_ptr for this session among the live ones
    std::shared_ptr<Session> self;
    {
      std::lock_guard tl(threads_mu_);
      for (auto& l : live_)
        if (l.get() == &s) self = l;
    }
    if (!self) {
      s.closing = true;
      return;
    }
    sessions_.emplace(id.str(), std::move(self));
  }
  s.client = id;
  s.registered = true;
  log_.emit("connect", {{"client", id.str()}});
  reply(s, ConnAckPacket{});
}

void Broker::handle_handshake(Session& s, const HandshakeReqPacket& pkt) {
  const auto& id = *s.client;
  bool known;
  {
    std::shared_lock lock(acl_mu_);
    known = acl_.has_entries(id.str());
  }
  if (!known) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.handshakes_failed;
      ++counters_.denials;
    }
    log_.emit("deny", {{"client", id.str()}, {"action", "handshake"}});
    return reply_error(s, ErrorCode::Unauthorized);
  }
  EncryptedEnvelope ack;
  try {
    ack = keys_->provision_key(id, pkt.wrapped_key);
  } catch (const Error& e) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.handshakes_failed;
    }
    log_.emit("handshake", {{"client", id.str()}, {"ok", false}, {"error", errc_name(e.code())}});
    return reply_error(s, ErrorCode::Internal);
  }
  s.handshake_complete = true;
  {
    std::lock_guard lock(counters_mu_);
    ++counters_.handshakes_ok;
  }
  log_.emit("handshake", {{"client", id.str()}, {"ok", true}});
  reply(s, HandshakeAckPacket{std::move(ack)});
}

void Broker::handle_subscribe(Session& s, const SubscribePacket& pkt) {
  const auto& id = *s.client;
  if (!s.handshake_complete) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.rejected_before_handshake;
    }
    return reply_error(s, ErrorCode::Unauthorized);
  }
  auto topic = validate_topic(pkt.topic);
  bool allowed = false;
  if (!topic.reserved()) {
    std::shared_lock lock(acl_mu_);
    allowed = acl_.authorize(id.str(), topic.str(), Action::Read);
  }
  if (!allowed) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.denials;
    }
    log_.emit("deny", {{"client", id.str()}, {"action", "subscribe"}, {"topic", topic.str()}});
    return reply_error(s, ErrorCode::Unauthorized);
  }
  {
    std::unique_lock lock(table_mu_);
    auto& subs = subscriptions_[topic.str()];
    if (std::find(subs.begin(), subs.end(), id.str()) == subs.end()) subs.push_back(id.str());
  }
  s.topics.insert(topic.str());
  {
    std::lock_guard lock(counters_mu_);
    ++counters_.subscribes_accepted;
  }
  reply(s, SubAckPacket{topic.str()});
}

void Broker::handle_publish(Session& s, const PublishPacket& pkt) {
  const auto& origin = *s.client;
  if (!s.handshake_complete) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.rejected_before_handshake;
    }
    return reply_error(s, ErrorCode::Unauthorized);
  }
  bool allowed;
  {
    std::shared_lock lock(acl_mu_);
    allowed = acl_.authorize(origin.str(), pkt.topic, Action::Write);
  }
  if (!allowed) {
    {
      std::lock_guard lock(counters_mu_);
      ++counters_.denials;
    }
    log_.emit("deny", {{"client", origin.str()}, {"action", "publish"}, {"topic", pkt.topic}});
    return reply_error(s, ErrorCode::Unauthorized);
  }
  tap("publish.envelope", pkt.envelope.serialize());
  {
    std::lock_guard lock(counters_mu_);
    ++counters_.publishes_accepted;
  }

  std::vector<std::pair<std::string, std::shared_ptr<Session>>> targets;
  {
    std::shared_lock lock(table_mu_);
    if (auto it = subscriptions_.find(pkt.topic); it != subscriptions_.end()) {
      for (const auto& sub : it->second) {
        auto sit = sessions_.find(sub);
        if (sit != sessions_.end()) targets.emplace_back(sub, sit->second);
      }
    }
  }

  bool skipped = false;
  for (auto& [name, dest] : targets) {
    EncryptedEnvelope out;
    if (config_.mode == BrokerMode::Vanilla) {
      out = pkt.envelope;
    } else {
      try {
        out = keys_->reencrypt(origin, ClientId::parse(name), pkt.envelope).envelope;
      } catch (const Error& e) {
        if (e.code() == Errc::NoKey || e.code() == Errc::UnsealFailed) {
          if (e.code() == Errc::UnsealFailed)
            log_.emit("unseal_alarm", {{"client", name}, {"error", e.what()}});
          log_.emit("no_key_skip", {{"origin", origin.str()}, {"dest", name}});
          {
            std::lock_guard lock(counters_mu_);
            ++counters_.no_key_skips;
          }
          skipped = true;
          continue;
        }
        if (e.code() == Errc::BadPadding) {
          log_.emit("bad_envelope", {{"client", origin.str()}, {"topic", pkt.topic}});
          return reply_error(s, ErrorCode::Malformed);
        }
        log_.emit("reencrypt_failed", {{"origin", origin.str()}, {"dest", name}, {"error", e.what()}});
        continue;
      }
    }
    tap("message.envelope", out.serialize());
    auto frame = encode_packet(MessagePacket{pkt.topic, std::move(out)});
    tap("frame.out", frame);
    try {
      dest->stream->send_frame(frame);
      std::lock_guard lock(counters_mu_);
      ++counters_.messages_sent;
    } catch (const Error& e) {
      // a stuck or departed subscriber must not stall the publisher
      log_.emit("deliver_failed", {{"dest", name}, {"error", e.what()}});
      dest->shutdown();
    }
  }
  if (skipped) reply_error(s, ErrorCode::NoKey);
}

void Broker::drop_session(Session& s) {
  if (!s.registered) return;
  {
    std::unique_lock lock(table_mu_);
    auto it = sessions_.find(s.client->str());
    if (it != sessions_.end() && it->second.get() == &s) sessions_.erase(it);
    for (const auto& t : s.topics) {
      auto sit = subscriptions_.find(t);
      if (sit == subscriptions_.end()) continue;
      auto& v = sit->second;
      v.erase(std::remove(v.begin(), v.end(), s.client->str()), v.end());
      if (v.empty()) subscriptions_.erase(sit);
    }
  }
  s.registered = false;
  log_.emit("disconnect", {{"client", s.client->str()}});
}

int run_broker(BrokerConfig config) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Broker broker(std::move(config));
  broker.start();
  for (;;) {
    int sig = 0;
    if (sigwait(&set, &sig) != 0) continue;
    if (sig == SIGHUP) {
      try {
        broker.reload_acl();
      } catch (const Error& e) {
        std::cerr << "ACL reload failed, keeping the previous table: " << e.what() << '\n';
      }
      continue;
    }
    break;
  }
  broker.stop();
  return 0;
}

}  // namespace mqttz
