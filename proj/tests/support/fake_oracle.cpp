// Scriptable fer-oracle/1 child used by the process-oracle tests.
//   fake_oracle <mode>
// good | uniform | badsum | negative | wrongid | error | garbage | crash | hang | badhandshake | silent

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "xfg/oracle.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "good";
  std::ios::sync_with_stdio(false);
  if (mode == "silent") {
    std::this_thread::sleep_for(std::chrono::hours(1));
    return 0;
  }
  if (mode == "badhandshake") {
    std::cout << R"({"protocol":"fer-oracle/0","classes":[]})" << "\n" << std::flush;
    return 0;
  }
  std::cout << xfg::protocol::kHandshake << "\n" << std::flush;

  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line);
    const std::uint64_t id = req.at("id").get<std::uint64_t>();
    const auto pixels = xfg::protocol::base64_decode(req.at("pixels").get<std::string>());
    if (pixels.size() != req.at("width").get<std::size_t>() * req.at("height").get<std::size_t>()) return 4;

    double mean = 0;
    for (auto p : pixels) mean += p / 255.0;
    mean /= pixels.empty() ? 1.0 : static_cast<double>(pixels.size());

    json resp = {{"id", id}};
    if (mode == "good") {
      // Deterministic function of the mean intensity.
      std::vector<double> w(6);
      double sum = 0;
      for (int c = 0; c < 6; ++c) sum += w[c] = 1.0 + c * mean;
      for (auto& v : w) v /= sum;
      resp["probs"] = w;
    } else if (mode == "uniform") {
      resp["probs"] = std::vector<double>(6, 1.0 / 6.0);
    } else if (mode == "badsum") {
      resp["probs"] = std::vector<double>(6, 0.8 / 6.0);
    } else if (mode == "negative") {
      resp["probs"] = {-0.1, 0.3, 0.2, 0.2, 0.2, 0.2};
    } else if (mode == "wrongid") {
      resp["id"] = id + 1;
      resp["probs"] = std::vector<double>(6, 1.0 / 6.0);
    } else if (mode == "error") {
      resp["error"] = "model exploded";
    } else if (mode == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    } else if (mode == "crash") {
      return 3;
    } else if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    } else {
      return 5;
    }
    std::cout << resp.dump() << "\n" << std::flush;
  }
  return 0;
}
