#include <doctest.h>

#include "harborscan/review.hpp"

using namespace harborscan;

namespace {

ReviewEvent ev(const std::string& img, ReviewStatus to, const std::string& at = "2024-01-01T00:00:00Z") {
  return ReviewEvent{img, to, at};
}

}  // namespace

TEST_SUITE("review") {
  TEST_CASE("transition graph") {
    using S = ReviewStatus;
    CHECK(ReviewState::allowed(S::Pending, S::Proposed));
    CHECK(ReviewState::allowed(S::Pending, S::Verified));
    CHECK(ReviewState::allowed(S::Proposed, S::Verified));
    CHECK(ReviewState::allowed(S::Verified, S::Verified));
    CHECK_FALSE(ReviewState::allowed(S::Verified, S::Pending));
    CHECK_FALSE(ReviewState::allowed(S::Verified, S::Proposed));
    CHECK_FALSE(ReviewState::allowed(S::Proposed, S::Pending));
  }

  TEST_CASE("unknown images are pending") {
    const ReviewState s;
    CHECK(s.get("x.png").status == ReviewStatus::Pending);
    CHECK_FALSE(s.get("x.png").provenance.has_value());
  }

  TEST_CASE("provenance follows the path") {
    ReviewState s;
    s.apply(ev("a", ReviewStatus::Proposed));
    s.apply(ev("a", ReviewStatus::Verified, "2024-01-02T00:00:00Z"));
    s.apply(ev("b", ReviewStatus::Verified));
    CHECK(*s.get("a").provenance == Provenance::SemiAutomatic);
    CHECK(s.get("a").updated_at == "2024-01-02T00:00:00Z");
    CHECK(*s.get("b").provenance == Provenance::Manual);
    s.apply(ev("a", ReviewStatus::Verified));
    CHECK(*s.get("a").provenance == Provenance::SemiAutomatic);
  }

  TEST_CASE("rejected moves leave the state untouched") {
    ReviewState s;
    s.apply(ev("a", ReviewStatus::Verified));
    const ReviewState before = s;
    CHECK_THROWS_AS(s.apply(ev("a", ReviewStatus::Proposed)), InvalidTransition);
    CHECK(s == before);
    CHECK(s.log().size() == 1);
  }

  TEST_CASE("replay and json round trip") {
    ReviewState s;
    s.apply(ev("a", ReviewStatus::Proposed));
    s.apply(ev("c", ReviewStatus::Verified));
    s.apply(ev("a", ReviewStatus::Verified));
    CHECK(ReviewState::replay(s.log()) == s);
    const ReviewState back = ReviewState::from_json(s.to_json());
    CHECK(back == s);
    CHECK(back.log() == s.log());
    CHECK(back.to_json() == s.to_json());
  }

  TEST_CASE("corrupt logs are rejected") {
    CHECK_THROWS(ReviewState::from_json("{"));
    CHECK_THROWS(ReviewState::from_json(
        R"({"version":1,"log":[{"image":"a","to":"verified","at":"t"},{"image":"a","to":"pending","at":"t"}]})"));
  }

  TEST_CASE("status names") {
    for (auto s : {ReviewStatus::Pending, ReviewStatus::Proposed, ReviewStatus::Verified})
      CHECK(parse_review_status(to_string(s)) == s);
    CHECK_THROWS(parse_review_status("done"));
    CHECK(std::string(to_string(Provenance::SemiAutomatic)) == "semi-automatic");
  }

  TEST_CASE("timestamps are utc") {
    const std::string t = utc_timestamp();
    CHECK(t.size() == 20);
    CHECK(t.back() == 'Z');
    CHECK(t[10] == 'T');
  }
}
