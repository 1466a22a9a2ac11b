#include <chrono>

#include "doctest.h"
#include "helpers.hpp"
#include "xfg/oracle.hpp"

using namespace xfg;
using namespace std::chrono_literals;

namespace {

std::string fake(const std::string& mode) { return std::string("exec '") + FAKE_ORACLE + "' " + mode; }

// What the fake's "good" mode computes: probs proportional to 1 + c * mean(u8 / 255).
ProbabilityVector expected_good(const GrayImage& img) {
  const auto bytes = protocol::to_u8(img);
  double mean = 0;
  for (auto b : bytes) mean += b / 255.0;
  mean /= static_cast<double>(bytes.size());
  ProbabilityVector p{};
  double sum = 0;
  for (int c = 0; c < 6; ++c) sum += p[c] = 1.0 + c * mean;
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

TEST_CASE("good child answers like the reference function") {
  ProcessOracle o(fake("good"), "good", 5s);
  CHECK(o.kind() == OracleKind::external_process);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GrayImage img = test::random_image(17, 9, s);
    const PredictionRecord r = o.classify(img);
    const ProbabilityVector want = expected_good(img);
    for (int c = 0; c < 6; ++c) CHECK(r.probs[c] == doctest::Approx(want[c]).epsilon(1e-12));
    CHECK(r.predicted == Expression::surprise);
  }
}

TEST_CASE("uniform child ties to anger") {
  ProcessOracle o(fake("uniform"), "u", 5s);
  CHECK(o.classify(GrayImage(4, 4, 0.3)).predicted == Expression::anger);
}

TEST_CASE("invalid responses are errors") {
  for (const char* mode : {"badsum", "negative", "error"}) {
    CAPTURE(mode);
    ProcessOracle o(fake(mode), mode, 5s);
    CHECK_THROWS_AS(o.classify(GrayImage(4, 4, 0.3)), OracleError);
  }
  for (const char* mode : {"wrongid", "garbage"}) {
    CAPTURE(mode);
    ProcessOracle o(fake(mode), mode, 5s);
    CHECK_THROWS_AS(o.classify(GrayImage(4, 4, 0.3)), ProtocolError);
    CHECK_THROWS_AS(o.classify(GrayImage(4, 4, 0.3)), OracleError);  // unusable afterwards
  }
}

TEST_CASE("child exit and bad handshakes") {
  {
    ProcessOracle o(fake("crash"), "crash", 5s);
    CHECK_THROWS_AS(o.classify(GrayImage(4, 4)), OracleError);
  }
  CHECK_THROWS_AS(ProcessOracle(fake("badhandshake"), "bh", 5s), ProtocolError);
  CHECK_THROWS_AS(ProcessOracle("exit 0", "none", 5s), OracleError);
}

TEST_CASE("timeouts") {
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(ProcessOracle(fake("silent"), "silent", 200ms), OracleError);
  {
    ProcessOracle o(fake("hang"), "hang", 200ms);
    CHECK_THROWS_AS(o.classify(GrayImage(4, 4)), OracleError);
  }
  CHECK(std::chrono::steady_clock::now() - start < 5s);
}

TEST_CASE("pool of 4 processes matches a pool of 1") {
  std::vector<GrayImage> imgs;
  for (int i = 0; i < 100; ++i) imgs.push_back(test::random_image(12, 12, 500 + i));
  OraclePool one(make_oracle_factory("cmd:" + fake("good"), "p", 5s), 1);
  OraclePool four(make_oracle_factory("cmd:" + fake("good"), "p", 5s), 4);
  const auto a = classify_batch(one, imgs);
  const auto b = classify_batch(four, imgs);
  REQUIRE(b.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) CHECK(a[i].probs == b[i].probs);
}

TEST_CASE("batch failure reports partial results") {
  ProcessOracle good(fake("good"), "g", 5s);
  std::vector<GrayImage> imgs = {GrayImage(4, 4, 0.1), GrayImage(4, 4, 0.2), GrayImage(), GrayImage(4, 4, 0.4)};
  try {
    classify_batch(good, imgs);
    FAIL("expected BatchError");
  } catch (const BatchError& e) {
    CHECK(e.failed_index() == 2);
    REQUIRE(e.partial().size() == 4);
    CHECK(e.partial()[0].has_value());
    CHECK(e.partial()[1].has_value());
    CHECK_FALSE(e.partial()[2].has_value());
    CHECK_FALSE(e.partial()[3].has_value());
  }
}
