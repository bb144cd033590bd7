#include "config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace recd::cli {

namespace {

using nlohmann::json;

// Reads one object section and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::runtime_error("config: '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw std::runtime_error("config: unknown key '" + name_ + "." + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::runtime_error("config: wrong type for '" + name_ + "." + key + "'");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

DontCareRule parse_rule(const std::string& s) {
  if (s == "iou") return DontCareRule::Iou;
  if (s == "intersection_over_area") return DontCareRule::IntersectionOverArea;
  throw std::runtime_error("config: dontcare_rule must be iou or intersection_over_area");
}

}  // namespace

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }

  AppConfig c;
  Section top(root, "config");
  top.get("seed", c.seed);
  c.split.seed = c.seed;
  c.proposals.meta.seed = c.seed;
  c.simulator.seed = c.seed;

  if (top.has("split")) {
    Section s(root.at("split"), "split");
    s.get("target_fraction", c.split.target_fraction);
    s.get("tolerance", c.split.tolerance);
    s.get("max_attempts", c.split.max_attempts);
  }
  if (top.has("proposals")) {
    Section s(root.at("proposals"), "proposals");
    s.get("method", c.method);
    s.get("min_score", c.proposals.min_score);
    s.get("nms", c.proposals.apply_nms);
    s.get("nms_iou", c.proposals.nms_iou);
    s.get("image_width", c.proposals.default_image.width);
    s.get("image_height", c.proposals.default_image.height);
    s.get("folds", c.proposals.meta.folds);
    std::string learner;
    s.get("learner", learner);
    if (learner == "logistic") c.proposals.meta.learner = MetaLearner::Logistic;
    else if (learner == "gbdt" || learner.empty()) c.proposals.meta.learner = MetaLearner::GradientBoosting;
    else throw std::runtime_error("config: proposals.learner must be gbdt or logistic");
  }
  if (top.has("simulator")) {
    Section s(root.at("simulator"), "simulator");
    s.get("accuracy", c.simulator.accuracy);
    s.get("cant_solve_rate", c.simulator.cant_solve_rate);
    s.get("duration_sigma", c.simulator.duration_sigma);
    s.get("box_jitter", c.simulator.box_jitter);
    s.get("recall", c.simulator.recall);
    s.get("keypoint_jitter", c.simulator.keypoint_jitter);
    s.get("seed", c.simulator.seed);
    s.get("pool_size", c.annotator_pool);
  }
  if (top.has("correction")) {
    Section s(root.at("correction"), "correction");
    std::string source;
    std::string validation;
    s.get("box_source", source);
    s.get("validation", validation);
    if (!source.empty()) c.strategy.box_source = parse_box_source(source);
    if (!validation.empty()) c.strategy.validation = parse_validation(validation);
    s.get("acceptance_threshold", c.strategy.acceptance_threshold);
    s.get("band_low", c.correction.band.low);
    s.get("band_high", c.correction.band.high);
    s.get("z", c.correction.z);
    s.get("keypoint_radius_px", c.stage1.keypoint_radius_px);
    s.get("candidate_iou", c.stage1.candidate_iou);
  }
  if (top.has("costs")) {
    Section s(root.at("costs"), "costs");
    auto& t = c.correction.costs;
    s.get("direct_box", t.direct_box);
    s.get("keypoint_to_box", t.keypoint_to_box);
    s.get("combined_box", t.combined_box);
    s.get("is_pedestrian", t.is_pedestrian);
    s.get("human_activity", t.human_activity);
    s.get("human_activity_ar", t.human_activity_ar);
    s.get("vgt_full", t.vgt_full);
  }
  if (top.has("service")) {
    Section s(root.at("service"), "service");
    s.get("host", c.http.host);
    s.get("port", c.http.port);
    s.get("threads", c.http.threads);
    std::string images;
    std::string bundle;
    s.get("image_dir", images);
    s.get("static_dir", bundle);
    if (!images.empty()) c.http.image_dir = images;
    if (!bundle.empty()) c.http.static_dir = bundle;
    double lease_minutes = static_cast<double>(c.service.lease_ms) / 60000.0;
    s.get("lease_minutes", lease_minutes);
    c.service.lease_ms = static_cast<std::int64_t>(lease_minutes * 60000.0);
    s.get("fsync", c.service.fsync);
    s.get("collect_timeout_s", c.collect_timeout_s);
  }
  if (top.has("evaluation")) {
    Section s(root.at("evaluation"), "evaluation");
    std::string rule = "iou";
    s.get("dontcare_rule", rule);
    c.dontcare_rule = parse_rule(rule);
    s.get("gt_iou", c.found.gt_iou);
    s.get("vgt_iou", c.found.vgt_iou);
    s.get("min_height", c.found.min_height);
    s.get("p_threshold", c.found.p_threshold);
    s.get("charge_full_vgt", c.charge_full_vgt);
    s.get("audit_images", c.audit_images);
  }
  return c;
}

}  // namespace recd::cli
