#include <doctest.h>

#include "mqttz/acl.hpp"
#include "mqttz/error.hpp"

using namespace mqttz;

TEST_CASE("topic pattern matching") {
  CHECK(topic_matches("#", "a/b/c"));
  CHECK(topic_matches("a/b", "a/b"));
  CHECK_FALSE(topic_matches("a/b", "a/b/c"));
  CHECK(topic_matches("a/#", "a"));
  CHECK(topic_matches("a/#", "a/b/c"));
  CHECK_FALSE(topic_matches("a/#", "ab"));
  CHECK_FALSE(topic_matches("a/#", "b/a"));
}

TEST_CASE("parse and authorize") {
  auto acl = parse_acl(R"(# ward sensors
user alice
topic write ward/bed-1/ecg
topic read alerts/#

user bob
topic ward/#
)");
  CHECK(acl.has_entries("alice"));
  CHECK(acl.authorize("alice", "ward/bed-1/ecg", Action::Write));
  CHECK_FALSE(acl.authorize("alice", "ward/bed-1/ecg", Action::Read));
  CHECK(acl.authorize("alice", "alerts/fire", Action::Read));
  CHECK_FALSE(acl.authorize("alice", "alerts/fire", Action::Write));
  CHECK(acl.authorize("bob", "ward/bed-9/ecg", Action::Read));
  CHECK(acl.authorize("bob", "ward/bed-9/ecg", Action::Write));
  CHECK_FALSE(acl.authorize("bob", "alerts", Action::Read));
}

TEST_CASE("default deny") {
  auto empty = parse_acl("");
  CHECK_FALSE(empty.has_entries("alice"));
  CHECK_FALSE(empty.authorize("alice", "x", Action::Read));
  CHECK_FALSE(empty.authorize("alice", "x", Action::Write));

  auto acl = parse_acl("user alice\ntopic a\n");
  CHECK_FALSE(acl.authorize("mallory", "a", Action::Read));
}

TEST_CASE("parse errors carry the line number") {
  auto fails_on = [](const char* text, const char* line) {
    try {
      (void)parse_acl(text);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ParseError);
      CHECK(std::string(e.what()).find(line) != std::string::npos);
      return;
    }
    FAIL("expected a parse error for: " << text);
  };
  fails_on("topic a\n", "line 1");
  fails_on("user alice\n\nfoo bar\n", "line 3");
  fails_on("user alice\ntopic read a/+/b\n", "line 2");
  fails_on("user alice\ntopic\n", "line 2");
  fails_on("user a/b\n", "line 1");
  fails_on("user alice extra\n", "line 1");
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_acl("/nonexistent/acl.conf"), Error);
}
