#include <iostream>

#include <CLI11.hpp>

#include "mqttz/error.hpp"
#include "mqttz/transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Self-signed development certificate for the broker"};
  std::string cert = "broker.crt", key = "broker.key", cn = "localhost";
  app.add_option("--cert", cert, "certificate output path");
  app.add_option("--key", key, "private key output path");
  app.add_option("--cn", cn, "common name");
  CLI11_PARSE(app, argc, argv);
  try {
    mqttz::net::generate_dev_certificate(cert, key, cn);
  } catch (const mqttz::Error& e) {
    std::cerr << "mqttz-devcert: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
