#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "mqttz/broker.hpp"
#include "mqttz/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Publish/subscribe broker with re-encryption in a trusted core"};
  std::string listen = "127.0.0.1:8883";
  std::string mode = "tee";
  mqttz::BrokerConfig cfg;
  app.add_option("--listen", listen, "host:port to listen on");
  app.add_option("--cert", cfg.cert, "TLS certificate (PEM)");
  app.add_option("--key", cfg.key, "TLS private key (PEM)");
  app.add_option("--acl", cfg.acl, "ACL file")->required()->check(CLI::ExistingFile);
  app.add_option("--store-dir", cfg.store_dir, "secure storage directory");
  app.add_option("--cache-capacity", cfg.cache_capacity, "keys held in the trusted cache")
      ->check(CLI::PositiveNumber);
  app.add_option("--export-pubkey", cfg.export_pubkey, "write the broker public key here");
  app.add_option("--mode", mode, "vanilla | ree | tee")
      ->check(CLI::IsMember({"vanilla", "ree", "tee"}));
  CLI11_PARSE(app, argc, argv);

  try {
    cfg.listen = mqttz::net::Endpoint::parse(listen);
    cfg.mode = mqttz::parse_broker_mode(mode);
    if (cfg.mode != mqttz::BrokerMode::Vanilla && (cfg.cert.empty() || cfg.key.empty())) {
      std::cerr << "--cert and --key are required in " << mode << " mode\n";
      return 2;
    }
    if (const char* seed = std::getenv("MQTTZ_HUK_SEED"))
      cfg.huk_seed = mqttz::crypto::HukSeed::from_hex(seed);
    cfg.event_sink = &std::cout;
    return mqttz::run_broker(std::move(cfg));
  } catch (const mqttz::Error& e) {
    std::cerr << "mqttz-broker: " << e.what() << '\n';
    return 1;
  }
}
