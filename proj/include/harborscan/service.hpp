#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "harborscan/backend.hpp"
#include "harborscan/dataset.hpp"
#include "harborscan/review.hpp"

namespace harborscan {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  std::optional<std::filesystem::path> ui_dir;  // served at / when set
  std::size_t page_size = 50;
  std::size_t max_page_size = 500;
};

// 64-bit FNV-1a, 16 lowercase hex digits. Missing files hash as empty content.
std::string content_hash(std::string_view bytes);

inline constexpr const char* kReviewStateFile = "review_state.json";

// HTTP review service over a scanned dataset. Image ids in URLs are indices
// into the sorted dataset index.
//
//   GET /api/images?offset=&limit=&status=
//   GET /api/images/{id}                 image bytes
//   GET /api/images/{id}/annotations     {"records":[...],"hash":...}
//   GET /api/images/{id}/proposals       replayed detections as records
//   PUT /api/images/{id}/annotations     {"records":[...],"base_hash":...}
//   GET /api/classes
class ReviewService {
 public:
  ReviewService(DatasetIndex index, DetectionsByImage proposals, ServiceOptions opts = {});
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(int port);
  // Blocks until stop().
  void listen();
  // bind + listen on a background thread.
  int start(int port = 0);
  void stop();

  ReviewState state() const;
  std::filesystem::path annotation_path(std::size_t image) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace harborscan
