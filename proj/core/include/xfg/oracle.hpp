#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xfg/expression.hpp"
#include "xfg/image.hpp"

namespace xfg {

class OracleError : public Error {
 public:
  using Error::Error;
};

/// Malformed frame, wrong id, bad handshake.
class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

enum class OracleKind { external_process, synthetic };

/// A black-box expression classifier. Implementations must return identical
/// probabilities for identical images.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual const std::string& identity() const = 0;
  virtual OracleKind kind() const = 0;
  virtual PredictionRecord classify(const GrayImage& img) = 0;
};

using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

// ---------------------------------------------------------------------------
// Synthetic oracles
// ---------------------------------------------------------------------------

/// Axis-aligned box in normalized image coordinates ([0,1] x [0,1]).
struct NormRect {
  double x0, y0, x1, y1;
};

class UniformOracle final : public Oracle {
 public:
  explicit UniformOracle(std::string id = "uniform") : id_(std::move(id)) {}
  const std::string& identity() const override { return id_; }
  OracleKind kind() const override { return OracleKind::synthetic; }
  PredictionRecord classify(const GrayImage& img) override;

 private:
  std::string id_;
};

/// Always the same distribution: `confidence` on one class, the rest spread evenly.
class ConstantClassOracle final : public Oracle {
 public:
  ConstantClassOracle(Expression cls, double confidence = 0.9, std::string id = "");
  const std::string& identity() const override { return id_; }
  OracleKind kind() const override { return OracleKind::synthetic; }
  PredictionRecord classify(const GrayImage& img) override;

 private:
  Expression cls_;
  double confidence_;
  std::string id_;
};

/// probs = softmax(mean intensity over the pixels rect_c touches / temperature).
class RegionSoftmaxOracle final : public Oracle {
 public:
  RegionSoftmaxOracle(std::array<NormRect, kExpressionCount> rects, double temperature, std::string id);
  const std::string& identity() const override { return id_; }
  OracleKind kind() const override { return OracleKind::synthetic; }
  PredictionRecord classify(const GrayImage& img) override;
  const std::array<NormRect, kExpressionCount>& rects() const { return rects_; }

 private:
  std::array<NormRect, kExpressionCount> rects_;
  double temperature_;
  std::string id_;
};

/// Face boxes in normalized coordinates matching the default layout.
namespace face_boxes {
inline constexpr NormRect kMouth{0.37, 0.67, 0.67, 0.80};
inline constexpr NormRect kLeftEye{0.26, 0.36, 0.48, 0.47};
inline constexpr NormRect kRightEye{0.54, 0.36, 0.76, 0.47};
inline constexpr NormRect kBrows{0.23, 0.29, 0.80, 0.36};
inline constexpr NormRect kNose{0.45, 0.47, 0.59, 0.63};
inline constexpr NormRect kForehead{0.30, 0.08, 0.72, 0.25};
inline constexpr NormRect kChin{0.42, 0.84, 0.62, 0.93};
}  // namespace face_boxes

/// Each class keyed to a distinct face part; happiness -> mouth.
RegionSoftmaxOracle make_mouth_oracle(double temperature = 0.1);

enum class OracleFamily { mouth, eyes };
/// Six sub-boxes tiling the family's region (mouth: 3x2 grid, eyes: 3 per
/// eye). `variant` shrinks the boxes slightly and changes the temperature so
/// members of a family are similar but not identical.
std::array<NormRect, kExpressionCount> family_rects(OracleFamily family, int variant = 0);
RegionSoftmaxOracle make_family_oracle(OracleFamily family, int variant, std::string id);

// ---------------------------------------------------------------------------
// fer-oracle/1 protocol: newline-delimited JSON over a child's stdio.
// ---------------------------------------------------------------------------
namespace protocol {

inline constexpr const char* kHandshake =
    R"({"protocol":"fer-oracle/1","classes":["anger","disgust","fear","happiness","sadness","surprise"]})";

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Row-major 8-bit pixels, round(clamp(v,0,1) * 255).
std::vector<std::uint8_t> to_u8(const GrayImage& img);

/// One request frame, including the trailing newline.
std::string encode_request(std::uint64_t id, const GrayImage& img);
/// Throws ProtocolError unless the line is the fer-oracle/1 handshake.
void check_handshake(const std::string& line);
/// Parses and validates one response frame.
PredictionRecord parse_response(const std::string& line, std::uint64_t expected_id);

}  // namespace protocol

/// Oracle backed by a child process started with `/bin/sh -c <command>`.
/// Owns exactly one child; one request in flight at a time.
class ProcessOracle final : public Oracle {
 public:
  ProcessOracle(const std::string& command, std::string id,
                std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~ProcessOracle() override;
  ProcessOracle(const ProcessOracle&) = delete;
  ProcessOracle& operator=(const ProcessOracle&) = delete;

  const std::string& identity() const override { return id_; }
  OracleKind kind() const override { return OracleKind::external_process; }
  PredictionRecord classify(const GrayImage& img) override;

 private:
  std::string read_line();
  void write_all(const std::string& data);
  void shutdown();

  std::string id_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
  bool broken_ = false;
};

/// Parses an oracle spec:
///   builtin:uniform | builtin:constant:<class> | builtin:mouth
///   builtin:family:<mouth|eyes>:<variant>      | cmd:<shell command>
OracleFactory make_oracle_factory(const std::string& spec, const std::string& id,
                                  std::chrono::milliseconds timeout = std::chrono::seconds(30));

/// P interchangeable oracle instances; each is leased to one caller at a time.
class OraclePool {
 public:
  OraclePool(const OracleFactory& factory, int size);

  class Lease {
   public:
    Lease(OraclePool& pool, std::size_t slot) : pool_(&pool), slot_(slot) {}
    Lease(Lease&& other) noexcept : pool_(std::exchange(other.pool_, nullptr)), slot_(other.slot_) {}
    Lease& operator=(Lease&&) = delete;
    ~Lease() {
      if (pool_) pool_->release(slot_);
    }
    Oracle& operator*() const { return *pool_->members_[slot_]; }
    Oracle* operator->() const { return pool_->members_[slot_].get(); }

   private:
    OraclePool* pool_;
    std::size_t slot_;
  };

  Lease acquire();
  std::size_t size() const { return members_.size(); }
  const std::string& identity() const { return members_.front()->identity(); }

 private:
  void release(std::size_t slot);

  std::vector<std::unique_ptr<Oracle>> members_;
  std::vector<bool> busy_;
  std::mutex mutex_;
  std::condition_variable available_;
};

/// Thrown by classify_batch: the records finished before the failure plus
/// the index that failed.
class BatchError : public OracleError {
 public:
  BatchError(const std::string& what, std::size_t failed_index,
             std::vector<std::optional<PredictionRecord>> partial)
      : OracleError(what), failed_index_(failed_index), partial_(std::move(partial)) {}
  std::size_t failed_index() const { return failed_index_; }
  const std::vector<std::optional<PredictionRecord>>& partial() const { return partial_; }

 private:
  std::size_t failed_index_;
  std::vector<std::optional<PredictionRecord>> partial_;
};

/// Order-preserving classify over the pool's members.
std::vector<PredictionRecord> classify_batch(OraclePool& pool, const std::vector<GrayImage>& imgs);
/// Serial form on a single oracle.
std::vector<PredictionRecord> classify_batch(Oracle& oracle, const std::vector<GrayImage>& imgs);

}  // namespace xfg
