#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "recd/codec.hpp"

using namespace recd;

namespace {

Answer random_answer(oracle::Rng& rng) {
  switch (rng.integer(0, 3)) {
    case 0:
      return std::string(options::kRiding);
    case 1:
      return oracle::real_box(rng, 1000, 1, 200);
    case 2: {
      std::vector<BBox> v;
      for (int i = 0; i < rng.integer(0, 4); ++i) v.push_back(oracle::real_box(rng, 1000, 1, 200));
      return v;
    }
    default: {
      std::vector<Point> v;
      for (int i = 0; i < rng.integer(0, 4); ++i) v.push_back({rng.uniform(0, 1242), rng.uniform(0, 375)});
      return v;
    }
  }
}

}  // namespace

TEST_CASE("answer wire formats") {
  CHECK(answer_to_json(std::string("Yes")) == "\"Yes\"");
  CHECK(answer_to_json(BBox(1, 2, 3, 4)) == "[1.0,2.0,3.0,4.0]");
  CHECK(answer_to_json(std::vector<BBox>{}) == R"({"boxes":[]})");
  CHECK(answer_to_json(std::vector<Point>{{1.5, 2}}) == R"({"points":[[1.5,2.0]]})");
  CHECK(std::get<BBox>(answer_from_json("[0, 0, 5, 5]")) == BBox(0, 0, 5, 5));
  CHECK_THROWS(answer_from_json("[5, 0, 0, 5]"));
  CHECK_THROWS(answer_from_json("[1, 2]"));
  CHECK_THROWS(answer_from_json("{\"other\": 1}"));
  CHECK_THROWS(answer_from_json("42"));
}

TEST_CASE("answers survive a round trip") {
  oracle::Rng rng(61);
  for (int i = 0; i < 500; ++i) {
    const Answer a = random_answer(rng);
    CHECK(answer_from_json(answer_to_json(a)) == a);
  }
}

TEST_CASE("microtasks survive a round trip") {
  Microtask t;
  t.task_id = "000001/p3/activity/ar";
  t.kind = MicrotaskKind::Activity;
  t.image_id = "000001";
  t.bbox = BBox(10.25, 20, 60, 150);
  t.subject_id = "000001/p3";
  t.assignments = 11;
  t.priority = 0.75;
  Microtask k;
  k.task_id = "000002/kb0";
  k.kind = MicrotaskKind::KeypointBox;
  k.image_id = "000002";
  k.keypoints = {{1, 2}, {3.5, 4}};
  k.assignments = 3;

  std::stringstream s;
  write_microtasks(s, {t, k});
  const auto back = read_microtasks(s);
  REQUIRE(back.size() == 2);
  CHECK(back[0].task_id == t.task_id);
  CHECK(back[0].kind == t.kind);
  CHECK(back[0].bbox == t.bbox);
  CHECK(back[0].subject_id == t.subject_id);
  CHECK(back[0].priority == t.priority);
  CHECK(back[1].keypoints == k.keypoints);
  CHECK_FALSE(back[1].bbox.has_value());
  CHECK(back[1].assignments == 3);
  CHECK(microtask_to_json(t).find("\"options\"") != std::string::npos);
}

TEST_CASE("responses survive a round trip") {
  oracle::Rng rng(62);
  std::vector<AnnotatorResponse> rs;
  for (int i = 0; i < 50; ++i) {
    rs.push_back({"t" + std::to_string(i), "ann-" + std::to_string(i), random_answer(rng),
                  rng.integer(1, 100000), rng.integer(0, 1000000)});
  }
  std::stringstream s;
  write_responses(s, rs);
  const auto back = read_responses(s);
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].task_id == rs[i].task_id);
    CHECK(back[i].annotator_id == rs[i].annotator_id);
    CHECK(back[i].answer == rs[i].answer);
    CHECK(back[i].duration_ms == rs[i].duration_ms);
    CHECK(back[i].timestamp_ms == rs[i].timestamp_ms);
  }
  CHECK(response_from_json(response_to_json(rs[0])).task_id == "t0");
  std::stringstream bad("{\"task_id\": 3}\n");
  CHECK_THROWS(read_responses(bad));
}
