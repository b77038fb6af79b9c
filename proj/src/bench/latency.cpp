#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <random>
#include <thread>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

namespace mqttz::bench {
namespace {

using Clock = std::chrono::steady_clock;
constexpr std::string_view kTopic = "bench/stream";

void put_seq(Bytes& payload, std::uint64_t seq) {
  for (std::size_t i = 0; i < 8; ++i)
    payload[i] = static_cast<std::uint8_t>(seq >> (56 - 8 * i));
}

std::uint64_t get_seq(const Bytes& payload) {
  std::uint64_t seq = 0;
  for (std::size_t i = 0; i < 8; ++i) seq = (seq << 8) | payload[i];
  return seq;
}

struct Arrivals {
  std::mutex mu;
  std::condition_variable cv;
  // [subscriber][seq]
  std::vector<std::vector<std::optional<Clock::time_point>>> at;
  std::vector<std::size_t> count;
};

}  // namespace

LatencyResult run_latency_macro(const LatencyOptions& options) {
  if (options.payload_size < 8)
    throw Error(Errc::InvalidArgument, "payload must hold a sequence number");
  std::vector<std::string> ids{"bench-pub"};
  for (std::size_t i = 0; i < options.subscribers; ++i)
    ids.push_back("bench-sub-" + std::to_string(i));
  EnvironmentOptions eo;
  eo.mode = options.mode;
  eo.acl_text = make_acl(ids, {std::string(kTopic)});
  Environment env(std::move(eo));

  // Without re-encryption the subscribers can only read what they share a key for.
  std::optional<crypto::SymmetricKey> shared;
  if (options.mode == BrokerMode::Vanilla) shared = crypto::SymmetricKey::random();

  auto publisher = env.connect(ids[0], shared);
  std::vector<std::unique_ptr<client::Client>> subs;
  for (std::size_t i = 0; i < options.subscribers; ++i) {
    subs.push_back(env.connect(ids[i + 1], shared));
    subs.back()->subscribe(kTopic);
  }

  Arrivals arrivals;
  arrivals.at.assign(options.subscribers,
                     std::vector<std::optional<Clock::time_point>>(options.messages));
  arrivals.count.assign(options.messages, 0);
  std::atomic<bool> stop{false};
  std::vector<std::thread> readers;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    readers.emplace_back([&, i] {
      try {
        while (!stop) {
          auto d = subs[i]->next_delivery(net::Millis{100});
          if (!d || d->plaintext.size() < 8) continue;
          auto seq = get_seq(d->plaintext);
          if (seq >= options.messages) continue;
          std::lock_guard lock(arrivals.mu);
          if (arrivals.at[i][seq]) continue;
          arrivals.at[i][seq] = d->received;
          ++arrivals.count[seq];
          arrivals.cv.notify_all();
        }
      } catch (const Error&) {
      }
    });
  }

  LatencyResult result;
  result.mode = options.mode;
  result.subscribers = options.subscribers;
  auto calls_before = env.broker().key_service().reencrypt_calls();

  std::mt19937_64 rng(options.seed);
  Bytes payload(options.payload_size);
  std::vector<Clock::time_point> sent(options.messages);
  for (std::size_t seq = 0; seq < options.messages; ++seq) {
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    put_seq(payload, seq);
    sent[seq] = Clock::now();
    publisher->publish(kTopic, payload);
    ++result.publishes;
    std::unique_lock lock(arrivals.mu);
    arrivals.cv.wait_for(lock, options.loss_timeout,
                         [&] { return arrivals.count[seq] == options.subscribers; });
  }

  stop = true;
  for (auto& t : readers) t.join();
  result.reencrypt_calls = env.broker().key_service().reencrypt_calls() - calls_before;

  for (std::size_t seq = 0; seq < options.messages; ++seq) {
    if (arrivals.count[seq] != options.subscribers) {
      ++result.lost;
      continue;
    }
    Clock::time_point last = sent[seq];
    for (const auto& per_sub : arrivals.at) last = std::max(last, *per_sub[seq]);
    result.delay_us.push_back(std::chrono::duration<double, std::micro>(last - sent[seq]).count());
  }
  return result;
}

void write_latency_csv(std::ostream& os, const std::vector<LatencyResult>& results) {
  os << "scenario,msg_seq,delay_us\n";
  for (const auto& r : results) {
    std::string scenario = std::string(broker_mode_name(r.mode));
    if (r.subscribers != 1) scenario += "-" + std::to_string(r.subscribers) + "sub";
    for (std::size_t i = 0; i < r.delay_us.size(); ++i)
      os << scenario << ',' << i << ',' << r.delay_us[i] << '\n';
  }
}

ScalingResult run_subscriber_scaling(BrokerMode mode, const std::vector<std::size_t>& counts,
                                     std::size_t messages_per_count, std::uint64_t seed) {
  ScalingResult out;
  for (auto n : counts) {
    LatencyOptions opt;
    opt.mode = mode;
    opt.subscribers = n;
    opt.messages = messages_per_count;
    opt.seed = seed;
    auto r = run_latency_macro(opt);
    out.counts.push_back(static_cast<double>(n));
    out.medians_us.push_back(r.delay_us.empty() ? 0.0 : summarize(r.delay_us).p50);
    out.runs.push_back(std::move(r));
  }
  out.fit = linear_fit(out.counts, out.medians_us);
  return out;
}

}  // namespace mqttz::bench
