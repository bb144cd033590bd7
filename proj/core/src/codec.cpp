#include "recd/codec.hpp"

#include <stdexcept>

#include "json_codec.hpp"

namespace recd {

namespace detail {

json box_to_json(const BBox& b) { return json::array({b.left(), b.top(), b.right(), b.bottom()}); }

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [l, t, r, b]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json answer_to_json(const Answer& a) {
  if (const auto* s = std::get_if<std::string>(&a)) return *s;
  if (const auto* b = std::get_if<BBox>(&a)) return box_to_json(*b);
  if (const auto* boxes = std::get_if<std::vector<BBox>>(&a)) {
    json arr = json::array();
    for (const auto& b : *boxes) arr.push_back(box_to_json(b));
    return {{"boxes", arr}};
  }
  json arr = json::array();
  for (const auto& p : std::get<std::vector<Point>>(a)) arr.push_back(json::array({p.x, p.y}));
  return {{"points", arr}};
}

Answer answer_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) return box_from_json(j);
  if (j.is_object() && j.contains("boxes")) {
    std::vector<BBox> boxes;
    for (const auto& b : j.at("boxes")) boxes.push_back(box_from_json(b));
    return boxes;
  }
  if (j.is_object() && j.contains("points")) {
    std::vector<Point> points;
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) throw std::invalid_argument("point must be [x, y]");
      points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return points;
  }
  throw std::invalid_argument("unrecognized answer payload");
}

json task_to_json(const Microtask& t) {
  json j = {{"task_id", t.task_id},
            {"kind", to_string(t.kind)},
            {"image_id", t.image_id},
            {"subject_id", t.subject_id},
            {"assignments", t.assignments},
            {"priority", t.priority}};
  j["bbox"] = t.bbox ? box_to_json(*t.bbox) : json(nullptr);
  json pts = json::array();
  for (const auto& p : t.keypoints) pts.push_back(json::array({p.x, p.y}));
  j["keypoints"] = pts;
  if (is_semantic(t.kind)) {
    json opts = json::array();
    for (auto o : answer_options(t.kind)) opts.push_back(std::string(o));
    j["options"] = opts;
  }
  return j;
}

Microtask task_from_json(const json& j) {
  Microtask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.kind = parse_microtask_kind(j.at("kind").get<std::string>());
  t.image_id = j.value("image_id", std::string());
  t.subject_id = j.value("subject_id", std::string());
  t.assignments = j.value("assignments", 11);
  t.priority = j.value("priority", 0.0);
  if (j.contains("bbox") && !j["bbox"].is_null()) t.bbox = box_from_json(j["bbox"]);
  if (j.contains("keypoints")) {
    for (const auto& p : j["keypoints"]) t.keypoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  if (t.assignments < 1) throw std::invalid_argument("task needs at least one assignment");
  return t;
}

json response_to_json(const AnnotatorResponse& r) {
  return {{"task_id", r.task_id},
          {"annotator_id", r.annotator_id},
          {"answer", detail::answer_to_json(r.answer)},
          {"duration_ms", r.duration_ms},
          {"timestamp_ms", r.timestamp_ms}};
}

AnnotatorResponse response_from_json(const json& j) {
  AnnotatorResponse r;
  r.task_id = j.at("task_id").get<std::string>();
  r.annotator_id = j.at("annotator_id").get<std::string>();
  r.answer = detail::answer_from_json(j.at("answer"));
  r.duration_ms = j.at("duration_ms").get<std::int64_t>();
  r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  return r;
}

}  // namespace detail

namespace {

template <typename T, typename F>
std::vector<T> read_lines(std::istream& in, F parse) {
  std::vector<T> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse(detail::json::parse(line)));
  }
  return out;
}

}  // namespace

std::string answer_to_json(const Answer& answer) { return detail::answer_to_json(answer).dump(); }
Answer answer_from_json(std::string_view text) {
  return detail::answer_from_json(detail::json::parse(text));
}
std::string microtask_to_json(const Microtask& task) { return detail::task_to_json(task).dump(); }
Microtask microtask_from_json(std::string_view text) {
  return detail::task_from_json(detail::json::parse(text));
}
std::string response_to_json(const AnnotatorResponse& response) {
  return detail::response_to_json(response).dump();
}
AnnotatorResponse response_from_json(std::string_view text) {
  return detail::response_from_json(detail::json::parse(text));
}

void write_responses(std::ostream& out, const std::vector<AnnotatorResponse>& responses) {
  for (const auto& r : responses) out << detail::response_to_json(r).dump() << '\n';
}

std::vector<AnnotatorResponse> read_responses(std::istream& in) {
  return read_lines<AnnotatorResponse>(in, detail::response_from_json);
}

void write_microtasks(std::ostream& out, const std::vector<Microtask>& tasks) {
  for (const auto& t : tasks) out << detail::task_to_json(t).dump() << '\n';
}

std::vector<Microtask> read_microtasks(std::istream& in) {
  return read_lines<Microtask>(in, detail::task_from_json);
}

}  // namespace recd
