#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace harborscan {

enum class ReviewStatus { Pending, Proposed, Verified };
enum class Provenance { Manual, SemiAutomatic };

const char* to_string(ReviewStatus s);
const char* to_string(Provenance p);
ReviewStatus parse_review_status(const std::string& s);

class InvalidTransition : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageReview {
  ReviewStatus status = ReviewStatus::Pending;
  std::optional<Provenance> provenance;  // set once verified
  std::string updated_at;                // empty while untouched

  friend bool operator==(const ImageReview&, const ImageReview&) = default;
};

struct ReviewEvent {
  std::string image;
  ReviewStatus to = ReviewStatus::Pending;
  std::string at;

  friend bool operator==(const ReviewEvent&, const ReviewEvent&) = default;
};

// pending -> proposed -> verified, or pending -> verified. Re-applying the
// current status is a no-op apart from the timestamp (a verified image may
// be saved again). Images never seen are pending.
class ReviewState {
 public:
  static bool allowed(ReviewStatus from, ReviewStatus to);

  // Throws InvalidTransition and leaves the state untouched when the move is
  // not in the graph.
  void apply(const ReviewEvent& e);

  const ImageReview& get(const std::string& image) const;
  const std::map<std::string, ImageReview>& images() const { return images_; }
  const std::vector<ReviewEvent>& log() const { return log_; }

  static ReviewState replay(std::span<const ReviewEvent> events);

  std::string to_json() const;
  // Rebuilds the state from the stored event log.
  static ReviewState from_json(const std::string& text);

  friend bool operator==(const ReviewState& a, const ReviewState& b) { return a.images_ == b.images_; }

 private:
  std::map<std::string, ImageReview> images_;
  std::vector<ReviewEvent> log_;
};

// UTC, second resolution: 2024-01-31T12:00:00Z
std::string utc_timestamp();

}  // namespace harborscan
