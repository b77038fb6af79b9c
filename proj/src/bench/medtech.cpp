#include <csignal>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "mqttz/bench.hpp"
#include "mqttz/error.hpp"

namespace mqttz::bench {
namespace {

using Clock = std::chrono::steady_clock;
using Seconds = std::chrono::duration<double>;

std::string bed_topic(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ward/bed-%02zu/ecg", i);
  return buf;
}

// [publisher u16][seq u32][int16 samples of a synthetic beat]
Bytes ecg_chunk(std::size_t publisher, std::uint32_t seq, std::size_t size, double& phase) {
  Bytes b(size, 0);
  b[0] = static_cast<std::uint8_t>(publisher >> 8);
  b[1] = static_cast<std::uint8_t>(publisher);
  for (std::size_t i = 0; i < 4; ++i) b[2 + i] = static_cast<std::uint8_t>(seq >> (24 - 8 * i));
  for (std::size_t i = 6; i + 1 < size; i += 2) {
    phase += 0.05;
    double spike = std::exp(-std::pow(std::fmod(phase, 6.28) - 3.14, 2) * 40);
    auto v = static_cast<std::int16_t>(800 * std::sin(phase) * 0.1 + 1200 * spike);
    b[i] = static_cast<std::uint8_t>(static_cast<std::uint16_t>(v) >> 8);
    b[i + 1] = static_cast<std::uint8_t>(v);
  }
  return b;
}

struct Publisher {
  std::unique_ptr<client::Client> client;
  std::string topic;
  std::size_t frame_bytes = 0;
  bool on = false;
  Clock::time_point toggle_at;
  Clock::time_point next_send;
  std::deque<Clock::time_point> window;
  std::vector<Clock::time_point> sends;
  std::uint32_t seq = 0;
  double phase = 0;
};

}  // namespace

MedtechReport run_medtech_workload(const MedtechOptions& options) {
  if (options.publishers == 0 || options.duration_s <= 0 || options.max_rate_bps <= 0)
    throw Error(Errc::InvalidArgument, "publishers, duration and rate must be positive");

  ScratchDir scratch("mqttz-medtech");
  auto dir = scratch.path();
  net::generate_dev_certificate(dir / "broker.crt", dir / "broker.key");
  std::vector<std::string> ids{"monitor"};
  for (std::size_t i = 0; i < options.publishers; ++i) ids.push_back("bed-" + std::to_string(i));
  {
    std::ofstream acl(dir / "acl.conf");
    acl << make_acl(ids, {"ward/#"});
  }
  net::Endpoint ep{"127.0.0.1", free_port()};
  BrokerProcess broker(options.broker_binary,
                       {"--listen", ep.to_string(), "--cert", (dir / "broker.crt").string(), "--key",
                        (dir / "broker.key").string(), "--acl", (dir / "acl.conf").string(),
                        "--store-dir", (dir / "store").string(), "--export-pubkey",
                        (dir / "pub.pem").string(), "--mode",
                        std::string(broker_mode_name(options.mode))},
                       {{"MQTTZ_HUK_SEED", std::string(kBenchSeedHex)}}, dir / "broker.log",
                       dir / "pub.pem", ep);

  auto config = [&](const std::string& id) {
    client::ClientConfig c;
    c.broker = ep;
    c.broker_pubkey = dir / "pub.pem";
    c.client_id = id;
    c.trust_root = dir / "broker.crt";
    c.plaintext_transport = options.mode == BrokerMode::Vanilla;
    return c;
  };
  std::optional<crypto::SymmetricKey> shared;
  if (options.mode == BrokerMode::Vanilla) shared = crypto::SymmetricKey::random();
  auto make_client = [&](const std::string& id) {
    auto c = shared ? std::make_unique<client::Client>(config(id), *shared)
                    : std::make_unique<client::Client>(config(id));
    c->establish();
    return c;
  };

  auto monitor = make_client("monitor");
  std::vector<Publisher> pubs(options.publishers);
  for (std::size_t i = 0; i < options.publishers; ++i) {
    pubs[i].topic = bed_topic(i);
    monitor->subscribe(pubs[i].topic);
    pubs[i].client = make_client(ids[i + 1]);
    pubs[i].frame_bytes = kFrameHeaderSize + 2 + pubs[i].topic.size() + kIvSize +
                          crypto::ciphertext_size(options.chunk_size);
  }
  if (static_cast<double>(pubs[0].frame_bytes) > options.max_rate_bps)
    throw Error(Errc::InvalidArgument, "a single frame exceeds the per-publisher rate");

  std::mutex recv_mu;
  std::set<std::pair<std::size_t, std::uint32_t>> received;
  std::atomic<bool> stop_monitor{false};
  std::thread monitor_thread([&] {
    try {
      while (!stop_monitor) {
        auto d = monitor->next_delivery(net::Millis{100});
        if (!d || d->plaintext.size() < 6) continue;
        const auto& p = d->plaintext;
        std::size_t pub = (std::size_t{p[0]} << 8) | p[1];
        std::uint32_t seq = (std::uint32_t{p[2]} << 24) | (std::uint32_t{p[3]} << 16) |
                            (std::uint32_t{p[4]} << 8) | p[5];
        std::lock_guard lock(recv_mu);
        received.emplace(pub, seq);
      }
    } catch (const Error&) {
    }
  });

  MedtechReport report;
  report.seconds = static_cast<std::size_t>(std::ceil(options.duration_s));
  report.bytes.assign(report.seconds, std::vector<std::size_t>(options.publishers, 0));

  std::atomic<bool> stop_cpu{false};
  std::thread cpu_thread([&] {
    double last = broker.cpu_seconds();
    auto tick = Clock::now();
    for (std::size_t s = 0; s < report.seconds && !stop_cpu; ++s) {
      tick += std::chrono::seconds(1);
      std::this_thread::sleep_until(tick);
      double now = broker.cpu_seconds();
      report.broker_cpu_percent.push_back(100.0 * (now - last));
      last = now;
    }
  });

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // On/off periods average 4 s; the fraction spent on matches the duty cycle.
  auto period = [&](bool on) {
    double mean = on ? 8.0 * options.duty_cycle : 8.0 * (1.0 - options.duty_cycle);
    return std::chrono::duration_cast<Clock::duration>(Seconds(mean * (0.5 + unit(rng))));
  };
  // Rate while on: whole frames per second that fit under the cap.
  auto interval = std::chrono::duration_cast<Clock::duration>(Seconds(1.0));

  auto start = Clock::now();
  auto end = start + std::chrono::duration_cast<Clock::duration>(Seconds(options.duration_s));
  for (auto& p : pubs) {
    p.on = unit(rng) < options.duty_cycle;
    p.toggle_at = start + period(p.on);
    p.next_send = start + std::chrono::duration_cast<Clock::duration>(Seconds(unit(rng)));
  }

  for (;;) {
    auto next = end;
    for (const auto& p : pubs) next = std::min({next, p.next_send, p.toggle_at});
    if (next >= end) break;
    std::this_thread::sleep_until(next);
    auto now = Clock::now();
    for (std::size_t i = 0; i < pubs.size(); ++i) {
      auto& p = pubs[i];
      while (p.toggle_at <= now) {
        p.on = !p.on;
        p.toggle_at += period(p.on);
      }
      if (p.next_send > now) continue;
      if (!p.on) {
        p.next_send = p.toggle_at;
        continue;
      }
      while (!p.window.empty() && now - p.window.front() >= interval) p.window.pop_front();
      double in_window = static_cast<double>(p.window.size() * p.frame_bytes);
      if (in_window + static_cast<double>(p.frame_bytes) > options.max_rate_bps) {
        p.next_send = p.window.front() + interval;
        continue;
      }
      p.client->publish(p.topic, ecg_chunk(i, p.seq++, options.chunk_size, p.phase));
      ++report.sent;
      p.window.push_back(now);
      p.sends.push_back(now);
      auto second = static_cast<std::size_t>(Seconds(now - start).count());
      if (second < report.seconds) report.bytes[second][i] += p.frame_bytes;
      p.next_send = now + interval;
    }
  }

  auto drain_deadline = Clock::now() + std::chrono::seconds(5);
  while (Clock::now() < drain_deadline) {
    {
      std::lock_guard lock(recv_mu);
      if (received.size() >= report.sent) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  stop_monitor = true;
  stop_cpu = true;
  monitor_thread.join();
  cpu_thread.join();
  for (auto& p : pubs) p.client->close();
  monitor->close();
  broker.signal(SIGTERM);
  broker.wait();

  report.received = received.size();
  report.lost = report.sent - std::min(report.sent, report.received);

  std::size_t in_band = 0;
  for (const auto& row : report.bytes) {
    double total = 0;
    for (auto b : row) total += static_cast<double>(b);
    report.aggregate_bps.push_back(total);
    if (total >= 3000 * 0.8 && total <= 5000 * 1.2) ++in_band;
  }
  report.in_band_fraction = static_cast<double>(in_band) / static_cast<double>(report.seconds);

  // Sliding 1 s windows anchored at every send.
  for (const auto& p : pubs) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < p.sends.size(); ++i) {
      while (j < p.sends.size() && p.sends[j] - p.sends[i] < interval) ++j;
      report.max_window_bytes =
          std::max(report.max_window_bytes, static_cast<double>((j - i) * p.frame_bytes));
    }
  }
  return report;
}

void write_medtech_csv(std::ostream& os, const MedtechReport& report) {
  os << "second,publisher,bytes\n";
  for (std::size_t s = 0; s < report.bytes.size(); ++s)
    for (std::size_t p = 0; p < report.bytes[s].size(); ++p)
      os << s << ',' << p << ',' << report.bytes[s][p] << '\n';
}

}  // namespace mqttz::bench
