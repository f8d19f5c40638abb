#include "harborscan/review.hpp"

#include <chrono>
#include <ctime>

#include <nlohmann/json.hpp>

namespace harborscan {

const char* to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Pending:
      return "pending";
    case ReviewStatus::Proposed:
      return "proposed";
    case ReviewStatus::Verified:
      return "verified";
  }
  return "pending";
}

const char* to_string(Provenance p) { return p == Provenance::Manual ? "manual" : "semi-automatic"; }

ReviewStatus parse_review_status(const std::string& s) {
  if (s == "pending") return ReviewStatus::Pending;
  if (s == "proposed") return ReviewStatus::Proposed;
  if (s == "verified") return ReviewStatus::Verified;
  throw std::invalid_argument("unknown review status '" + s + "'");
}

bool ReviewState::allowed(ReviewStatus from, ReviewStatus to) {
  if (from == to) return true;
  if (from == ReviewStatus::Pending) return true;
  return from == ReviewStatus::Proposed && to == ReviewStatus::Verified;
}

void ReviewState::apply(const ReviewEvent& e) {
  const ImageReview& cur = get(e.image);
  if (!allowed(cur.status, e.to)) {
    throw InvalidTransition(std::string("cannot move ") + e.image + " from " + to_string(cur.status) + " to " +
                            to_string(e.to));
  }
  ImageReview next = cur;
  if (e.to == ReviewStatus::Verified && cur.status != ReviewStatus::Verified) {
    next.provenance = cur.status == ReviewStatus::Proposed ? Provenance::SemiAutomatic : Provenance::Manual;
  }
  next.status = e.to;
  next.updated_at = e.at;
  images_[e.image] = next;
  log_.push_back(e);
}

const ImageReview& ReviewState::get(const std::string& image) const {
  static const ImageReview kPending;
  auto it = images_.find(image);
  return it == images_.end() ? kPending : it->second;
}

ReviewState ReviewState::replay(std::span<const ReviewEvent> events) {
  ReviewState s;
  for (const auto& e : events) s.apply(e);
  return s;
}

std::string ReviewState::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = 1;
  auto& imgs = j["images"] = ordered_json::object();
  for (const auto& [id, r] : images_) {
    ordered_json o;
    o["status"] = to_string(r.status);
    o["provenance"] = r.provenance ? ordered_json(to_string(*r.provenance)) : ordered_json(nullptr);
    o["updated_at"] = r.updated_at;
    imgs[id] = std::move(o);
  }
  auto& log = j["log"] = ordered_json::array();
  for (const auto& e : log_) log.push_back({{"image", e.image}, {"to", to_string(e.to)}, {"at", e.at}});
  return j.dump(2) + "\n";
}

ReviewState ReviewState::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  std::vector<ReviewEvent> events;
  for (const auto& e : j.at("log")) {
    events.push_back(ReviewEvent{e.at("image").get<std::string>(), parse_review_status(e.at("to").get<std::string>()),
                                 e.value("at", std::string())});
  }
  return replay(events);
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace harborscan
