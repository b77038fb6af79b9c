#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mqttz/client.hpp"
#include "mqttz/error.hpp"

namespace {

mqttz::Bytes read_payload(const std::string& path) {
  std::istreambuf_iterator<char> end;
  if (path == "-") return mqttz::Bytes(std::istreambuf_iterator<char>(std::cin), end);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mqttz::Error(mqttz::Errc::Io, "cannot read " + path);
  return mqttz::Bytes(std::istreambuf_iterator<char>(in), end);
}

std::int64_t wall_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Client for the re-encrypting broker"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string broker = "127.0.0.1:8883";
  std::string key_file;
  mqttz::client::ClientConfig cfg;
  app.add_option("--broker", broker, "broker host:port");
  app.add_option("--pubkey", cfg.broker_pubkey, "broker public key (PEM)")->required();
  app.add_option("--id", cfg.client_id, "client id")->required();
  app.add_option("--key-file", key_file, "client key as 64 hex characters; random if omitted");
  app.add_option("--ca", cfg.trust_root, "trust root for the broker certificate");
  app.add_flag("--plain", cfg.plaintext_transport, "plain TCP (vanilla broker only)");

  auto* handshake = app.add_subcommand("handshake", "connect and provision the client key");

  auto* pub = app.add_subcommand("pub", "publish messages");
  std::string topic, payload_file, message;
  std::size_t count = 1;
  double rate = 0;
  pub->add_option("--topic", topic)->required();
  auto* pf = pub->add_option("--payload-file", payload_file, "payload file, '-' for stdin");
  pub->add_option("--message", message, "payload text")->excludes(pf);
  pub->add_option("--count", count, "number of messages");
  pub->add_option("--rate", rate, "messages per second, 0 for as fast as possible");

  auto* sub = app.add_subcommand("sub", "subscribe and print messages");
  std::string out_path;
  std::size_t sub_count = 0;
  sub->add_option("--topic", topic)->required();
  sub->add_option("--count", sub_count, "stop after this many messages, 0 for never");
  sub->add_option("--out", out_path, "write messages here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.broker = mqttz::net::Endpoint::parse(broker);
    if (!key_file.empty()) cfg.key_file = key_file;
    if (!cfg.plaintext_transport && cfg.trust_root.empty())
      throw mqttz::Error(mqttz::Errc::InvalidArgument, "--ca is required for TLS");
    mqttz::client::Client client(cfg);
    client.establish();

    if (*handshake) {
      std::cout << "handshake ok: " << client.id().str() << '\n';
    } else if (*pub) {
      auto payload = payload_file.empty() ? mqttz::to_bytes(message) : read_payload(payload_file);
      auto next = std::chrono::steady_clock::now();
      for (std::size_t i = 0; i < count; ++i) {
        if (rate > 0) {
          std::this_thread::sleep_until(next);
          next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              std::chrono::duration<double>(1.0 / rate));
        }
        client.publish(topic, payload);
      }
      // give the broker a moment to report errors for what was just sent
      client.next_delivery(std::chrono::milliseconds(200));
      for (auto code : client.take_errors())
        std::cerr << "broker error: " << mqttz::error_code_name(code) << '\n';
    } else if (*sub) {
      std::ofstream file;
      if (!out_path.empty()) file.open(out_path, std::ios::app);
      std::ostream& out = out_path.empty() ? std::cout : file;
      std::size_t seen = 0;
      client.subscribe_loop(topic, [&](const mqttz::client::Delivery& d) {
        std::string text(d.plaintext.begin(), d.plaintext.end());
        nlohmann::json rec = {{"ts_us", wall_us()}, {"topic", d.topic}, {"size", d.plaintext.size()}};
        if (mqttz::is_valid_utf8(text))
          rec["payload"] = text;
        else
          rec["payload_hex"] = mqttz::to_hex(d.plaintext);
        out << rec.dump() << '\n' << std::flush;
        return sub_count == 0 || ++seen < sub_count;
      });
      if (client.bad_padding_count() > 0)
        std::cerr << client.bad_padding_count() << " messages did not decrypt\n";
    }
  } catch (const mqttz::Error& e) {
    std::cerr << "mqttz-client: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
