#include "xfg/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "xfg/parallel.hpp"

namespace xfg {

namespace {

constexpr std::array<std::string_view, kExpressionCount> kNames = {
    "anger", "disgust", "fear", "happiness", "sadness", "surprise"};
constexpr std::array<std::string_view, kExpressionCount> kDisplay = {
    "Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise"};

ProbabilityVector softmax(const std::array<double, kExpressionCount>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector p{};
  double sum = 0.0;
  for (int c = 0; c < kExpressionCount; ++c) {
    p[c] = std::exp(logits[c] - top);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

double rect_mean(const GrayImage& img, const NormRect& r) {
  const int w = img.width(), h = img.height();
  const int x0 = std::clamp(static_cast<int>(std::floor(r.x0 * w)), 0, w - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(r.x1 * w)), x0 + 1, w);
  const int y0 = std::clamp(static_cast<int>(std::floor(r.y0 * h)), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(std::ceil(r.y1 * h)), y0 + 1, h);
  double sum = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) sum += img(x, y);
  return sum / (static_cast<double>(x1 - x0) * (y1 - y0));
}

NormRect inset(const NormRect& r, double fx, double fy) {
  const double dx = (r.x1 - r.x0) * fx, dy = (r.y1 - r.y0) * fy;
  return {r.x0 + dx, r.y0 + dy, r.x1 - dx, r.y1 - dy};
}

}  // namespace

std::string_view to_string(Expression e) { return kNames[index_of(e)]; }
std::string_view display_name(Expression e) { return kDisplay[index_of(e)]; }

std::optional<Expression> parse_expression(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (int c = 0; c < kExpressionCount; ++c)
    if (lower == kNames[c]) return static_cast<Expression>(c);
  if (lower.size() == 1 && lower[0] >= '0' && lower[0] < '0' + kExpressionCount)
    return static_cast<Expression>(lower[0] - '0');
  return std::nullopt;
}

Expression expression_from_index(int index) {
  if (index < 0 || index >= kExpressionCount) throw Error("expression index out of range");
  return static_cast<Expression>(index);
}

Expression argmax(const ProbabilityVector& probs) {
  int best = 0;
  for (int c = 1; c < kExpressionCount; ++c)
    if (probs[c] > probs[best]) best = c;
  return static_cast<Expression>(best);
}

PredictionRecord make_prediction(const ProbabilityVector& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p)) throw OracleError("oracle returned a non-finite probability");
    if (p < 0.0) throw OracleError("oracle returned a negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
    throw OracleError("oracle probabilities sum to " + std::to_string(sum) + ", not 1");
  return {probs, argmax(probs)};
}

// --- synthetic oracles -----------------------------------------------------

PredictionRecord UniformOracle::classify(const GrayImage& img) {
  if (img.empty()) throw OracleError("classify: empty image");
  ProbabilityVector p;
  p.fill(1.0 / kExpressionCount);
  return make_prediction(p);
}

ConstantClassOracle::ConstantClassOracle(Expression cls, double confidence, std::string id)
    : cls_(cls), confidence_(confidence), id_(std::move(id)) {
  if (!(confidence > 1.0 / kExpressionCount && confidence <= 1.0))
    throw Error("constant oracle confidence must be in (1/6, 1]");
  if (id_.empty()) id_ = "constant-" + std::string(to_string(cls));
}

PredictionRecord ConstantClassOracle::classify(const GrayImage& img) {
  if (img.empty()) throw OracleError("classify: empty image");
  ProbabilityVector p;
  p.fill((1.0 - confidence_) / (kExpressionCount - 1));
  p[index_of(cls_)] = confidence_;
  return make_prediction(p);
}

RegionSoftmaxOracle::RegionSoftmaxOracle(std::array<NormRect, kExpressionCount> rects,
                                         double temperature, std::string id)
    : rects_(rects), temperature_(temperature), id_(std::move(id)) {
  if (!(temperature > 0)) throw Error("region oracle temperature must be positive");
  for (const auto& r : rects_) {
    if (!(r.x0 >= 0 && r.y0 >= 0 && r.x1 <= 1 && r.y1 <= 1 && r.x0 < r.x1 && r.y0 < r.y1))
      throw Error("region oracle rectangles must be non-empty and inside [0,1]^2");
  }
}

PredictionRecord RegionSoftmaxOracle::classify(const GrayImage& img) {
  if (img.empty()) throw OracleError("classify: empty image");
  std::array<double, kExpressionCount> logits{};
  for (int c = 0; c < kExpressionCount; ++c) logits[c] = rect_mean(img, rects_[c]) / temperature_;
  return make_prediction(softmax(logits));
}

RegionSoftmaxOracle make_mouth_oracle(double temperature) {
  using namespace face_boxes;
  // anger, disgust, fear, happiness, sadness, surprise
  return RegionSoftmaxOracle({kBrows, kNose, kLeftEye, kMouth, kChin, kForehead}, temperature,
                             "mouth-oracle");
}

std::array<NormRect, kExpressionCount> family_rects(OracleFamily family, int variant) {
  std::array<NormRect, kExpressionCount> rects{};
  if (family == OracleFamily::mouth) {
    const NormRect m = face_boxes::kMouth;
    const double cw = (m.x1 - m.x0) / 3, ch = (m.y1 - m.y0) / 2;
    for (int c = 0; c < kExpressionCount; ++c) {
      const int col = c % 3, row = c / 3;
      rects[c] = {m.x0 + col * cw, m.y0 + row * ch, m.x0 + (col + 1) * cw, m.y0 + (row + 1) * ch};
    }
  } else {
    for (int c = 0; c < kExpressionCount; ++c) {
      const NormRect e = c < 3 ? face_boxes::kLeftEye : face_boxes::kRightEye;
      const double cw = (e.x1 - e.x0) / 3;
      const int col = c % 3;
      rects[c] = {e.x0 + col * cw, e.y0, e.x0 + (col + 1) * cw, e.y1};
    }
  }
  const double shrink = 0.05 * (variant % 3);
  for (auto& r : rects) r = inset(r, shrink, shrink);
  return rects;
}

RegionSoftmaxOracle make_family_oracle(OracleFamily family, int variant, std::string id) {
  const double temperature = 0.05 * (1.0 + 0.25 * (variant % 4));
  return RegionSoftmaxOracle(family_rects(family, variant), temperature, std::move(id));
}

// --- factory ------------------------------------------------------------------

OracleFactory make_oracle_factory(const std::string& spec, const std::string& id,
                                  std::chrono::milliseconds timeout) {
  auto fields = [&] {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
      const auto colon = spec.find(':', start);
      out.push_back(spec.substr(start, colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    return out;
  }();
  if (fields[0] == "cmd" && spec.size() > 4) {
    const std::string command = spec.substr(4);
    return [command, id, timeout] { return std::make_unique<ProcessOracle>(command, id, timeout); };
  }
  if (fields[0] == "builtin" && fields.size() >= 2) {
    const std::string& kind = fields[1];
    if (kind == "uniform" && fields.size() == 2)
      return [id] { return std::make_unique<UniformOracle>(id); };
    if (kind == "mouth" && fields.size() == 2) {
      return [id] {
        auto o = make_mouth_oracle();
        return std::make_unique<RegionSoftmaxOracle>(o.rects(), 0.1, id);
      };
    }
    if (kind == "constant" && fields.size() == 3) {
      const auto cls = parse_expression(fields[2]);
      if (!cls) throw Error("unknown expression in oracle spec: " + fields[2]);
      return [c = *cls, id] { return std::make_unique<ConstantClassOracle>(c, 0.9, id); };
    }
    if (kind == "family" && fields.size() == 4) {
      OracleFamily fam;
      if (fields[2] == "mouth") fam = OracleFamily::mouth;
      else if (fields[2] == "eyes") fam = OracleFamily::eyes;
      else throw Error("unknown oracle family: " + fields[2]);
      int variant = 0;
      try {
        variant = std::stoi(fields[3]);
      } catch (const std::logic_error&) {
        throw Error("bad oracle variant: " + fields[3]);
      }
      return [fam, variant, id] {
        return std::make_unique<RegionSoftmaxOracle>(make_family_oracle(fam, variant, id));
      };
    }
  }
  throw Error("unrecognized oracle spec: \"" + spec + "\"");
}

// --- pool -----------------------------------------------------------------------

OraclePool::OraclePool(const OracleFactory& factory, int size) {
  if (size < 1) throw Error("oracle pool size must be at least 1");
  for (int i = 0; i < size; ++i) members_.push_back(factory());
  busy_.assign(members_.size(), false);
}

OraclePool::Lease OraclePool::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    for (std::size_t i = 0; i < busy_.size(); ++i) {
      if (!busy_[i]) {
        busy_[i] = true;
        return Lease(*this, i);
      }
    }
    available_.wait(lock);
  }
}

void OraclePool::release(std::size_t slot) {
  {
    std::lock_guard lock(mutex_);
    busy_[slot] = false;
  }
  available_.notify_one();
}

std::vector<PredictionRecord> classify_batch(Oracle& oracle, const std::vector<GrayImage>& imgs) {
  std::vector<PredictionRecord> out;
  out.reserve(imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    try {
      out.push_back(oracle.classify(imgs[i]));
    } catch (const OracleError& e) {
      std::vector<std::optional<PredictionRecord>> partial(out.begin(), out.end());
      partial.resize(imgs.size());
      throw BatchError("image " + std::to_string(i) + ": " + e.what(), i, std::move(partial));
    }
  }
  return out;
}

std::vector<PredictionRecord> classify_batch(OraclePool& pool, const std::vector<GrayImage>& imgs) {
  std::vector<std::optional<PredictionRecord>> slots(imgs.size());
  std::mutex fail_mutex;
  std::optional<std::size_t> failed;
  std::string message;
  try {
    parallel_for(imgs.size(), static_cast<int>(pool.size()), [&](std::size_t i) {
      auto lease = pool.acquire();
      try {
        slots[i] = lease->classify(imgs[i]);
      } catch (const OracleError& e) {
        std::lock_guard lock(fail_mutex);
        if (!failed || i < *failed) {
          failed = i;
          message = e.what();
        }
        throw;
      }
    });
  } catch (const OracleError&) {
    throw BatchError("image " + std::to_string(*failed) + ": " + message, *failed, std::move(slots));
  }
  std::vector<PredictionRecord> out;
  out.reserve(imgs.size());
  for (auto& s : slots) out.push_back(*s);
  return out;
}

// --- protocol ---------------------------------------------------------------------

namespace protocol {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ProtocolError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw ProtocolError("invalid base64 padding");
        v[k] = value(c);
        if (v[k] < 0) throw ProtocolError("invalid base64 character");
      }
    }
    const std::uint32_t bits = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(bits >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(bits & 0xff));
  }
  return out;
}

std::vector<std::uint8_t> to_u8(const GrayImage& img) {
  std::vector<std::uint8_t> out(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), out.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

std::string encode_request(std::uint64_t id, const GrayImage& img) {
  // Field order is fixed, so the frame is assembled by hand.
  std::string frame = "{\"id\":" + std::to_string(id) + ",\"width\":" + std::to_string(img.width()) +
                      ",\"height\":" + std::to_string(img.height()) + ",\"pixels\":\"" +
                      base64_encode(to_u8(img)) + "\"}\n";
  return frame;
}

void check_handshake(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("handshake is not JSON: " + line.substr(0, 200));
  }
  if (j != nlohmann::json::parse(kHandshake))
    throw ProtocolError("unexpected handshake: " + line.substr(0, 200));
}

PredictionRecord parse_response(const std::string& line, std::uint64_t expected_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("malformed response frame: " + line.substr(0, 200));
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned())
    throw ProtocolError("response frame without unsigned id");
  if (j["id"].get<std::uint64_t>() != expected_id)
    throw ProtocolError("response id " + j["id"].dump() + " does not match request " +
                        std::to_string(expected_id));
  if (j.contains("error"))
    throw OracleError("oracle reported error: " + j["error"].dump());
  if (!j.contains("probs") || !j["probs"].is_array() || j["probs"].size() != kExpressionCount)
    throw ProtocolError("response frame needs \"probs\" with 6 entries");
  ProbabilityVector p{};
  for (int c = 0; c < kExpressionCount; ++c) {
    const auto& v = j["probs"][c];
    if (!v.is_number()) throw ProtocolError("non-numeric probability");
    p[c] = v.get<double>();
  }
  return make_prediction(p);
}

}  // namespace protocol

}  // namespace xfg
