#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "harborscan/anchors.hpp"
#include "harborscan/decode.hpp"

namespace harborscan {

using DetectionsByImage = std::map<std::string, std::vector<Detection>>;

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingEntry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anything that turns an image identifier into detections.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<Detection> detect(const std::string& image_id) = 0;
};

// Detections file: JSON lines of
//   {"image":..., "class_id":..., "confidence":..., "cx":..., "cy":..., "w":..., "h":...}
// with six-decimal numbers. Lines are emitted grouped by image id (sorted),
// keeping the per-image order.
std::string format_detections(const DetectionsByImage& dets);
DetectionsByImage parse_detections(const std::string& text);
DetectionsByImage load_detections(const std::filesystem::path& p);

// Serves detections recorded in a detections file. Unknown images have none.
class ReplayBackend : public DetectorBackend {
 public:
  explicit ReplayBackend(DetectionsByImage dets) : dets_(std::move(dets)) {}
  static ReplayBackend from_file(const std::filesystem::path& p);

  std::vector<Detection> detect(const std::string& image_id) override;
  const DetectionsByImage& entries() const { return dets_; }

 private:
  DetectionsByImage dets_;
};

// Binary head dump:
//   8 bytes  magic "HSHEAD01"
//   4 bytes  little-endian uint32 header length N
//   N bytes  JSON header {"classes":C,"boxes":B,"scales":[{"stride":s,"grid":S},...]}
//   then per scale S*S*B*(5+C) little-endian float32 values, [cy][cx][anchor][attr]
std::string encode_head_dump(const RawHeadOutput& raw, const HeadConfig& cfg);
RawHeadOutput decode_head_dump(const std::string& bytes, HeadConfig* cfg_out = nullptr);

// Reads `<dir>/<image stem>.head` for each image, decodes and suppresses.
class TensorBackend : public DetectorBackend {
 public:
  TensorBackend(std::filesystem::path dir, AnchorSet anchors, HeadConfig cfg, DecodeParams params);

  std::vector<Detection> detect(const std::string& image_id) override;
  std::filesystem::path dump_path(const std::string& image_id) const;

 private:
  std::filesystem::path dir_;
  AnchorSet anchors_;
  HeadConfig cfg_;
  DecodeParams params_;
};

}  // namespace harborscan
