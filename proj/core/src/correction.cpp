#include "recd/correction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace recd {

namespace {

constexpr std::array<std::pair<BoxSource, std::string_view>, 4> kSources{{
    {BoxSource::DirectBox, "direct_box"},
    {BoxSource::KeypointToBox, "keypoint_to_box"},
    {BoxSource::Combined, "combined"},
    {BoxSource::DetectorProposals, "detector"},
}};

constexpr std::array<std::pair<Validation, std::string_view>, 4> kValidations{{
    {Validation::IsPedestrian11, "is_pedestrian_11"},
    {Validation::HumanAndActivity22, "human_activity_22"},
    {Validation::HumanAndActivityAR, "human_activity_ar"},
    {Validation::VgtFull, "vgt_full"},
}};

constexpr std::string_view kHumanSuffix = "/is_human";
constexpr std::string_view kActivitySuffix = "/activity";
constexpr std::string_view kPedestrianSuffix = "/is_pedestrian";
constexpr std::string_view kRefineSuffix = "/ar";

std::vector<std::string> answer_tokens(std::span<const AnnotatorResponse> responses) {
  std::vector<std::string> tokens;
  tokens.reserve(responses.size());
  for (const auto& r : responses) {
    const auto* t = std::get_if<std::string>(&r.answer);
    if (t == nullptr) throw std::invalid_argument("semantic response without option token");
    tokens.push_back(*t);
  }
  return tokens;
}

ResponseCounts count_tokens(std::span<const AnnotatorResponse> responses,
                            const std::string& prefix = {}) {
  ResponseCounts counts;
  for (const auto& token : answer_tokens(responses)) {
    ++counts[prefix.empty() ? token : prefix + ":" + token];
  }
  return counts;
}

bool is_product(Validation v) noexcept { return v != Validation::IsPedestrian11; }

std::vector<std::string> task_ids_for(Validation v, const std::string& box_id, bool refine) {
  const std::string tail = refine ? std::string(kRefineSuffix) : std::string();
  if (!is_product(v)) return {box_id + std::string(kPedestrianSuffix) + tail};
  return {box_id + std::string(kHumanSuffix) + tail, box_id + std::string(kActivitySuffix) + tail};
}

std::vector<Microtask> make_validation_tasks(Validation v, std::span<const ReviewBox> boxes,
                                             bool refine) {
  std::vector<Microtask> tasks;
  for (const auto& b : boxes) {
    const auto ids = task_ids_for(v, b.box_id, refine);
    const std::array<MicrotaskKind, 2> kinds =
        is_product(v) ? std::array{MicrotaskKind::IsHuman, MicrotaskKind::Activity}
                      : std::array{MicrotaskKind::IsPedestrian, MicrotaskKind::IsPedestrian};
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Microtask t;
      t.task_id = ids[k];
      t.kind = kinds[k];
      t.image_id = b.image_id;
      t.bbox = b.bbox;
      t.subject_id = b.box_id;
      t.assignments = kSemanticAnnotators;
      t.priority = b.priority;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

const WorldObject* nearest_object(const std::vector<WorldObject>& objects, const Point& p) {
  const WorldObject* best = nullptr;
  bool best_inside = false;
  double best_d = 0.0;
  for (const auto& o : objects) {
    if (o.semantics.human < 0.5) continue;
    const bool inside = p.x >= o.box.left() && p.x <= o.box.right() && p.y >= o.box.top() &&
                        p.y <= o.box.bottom();
    const double d = std::hypot(p.x - o.box.center_x(), p.y - o.box.center_y());
    if (best == nullptr || (inside && !best_inside) || (inside == best_inside && d < best_d)) {
      best = &o;
      best_inside = inside;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(BoxSource source) noexcept {
  for (const auto& [s, name] : kSources) {
    if (s == source) return name;
  }
  return "unknown";
}

std::string_view to_string(Validation validation) noexcept {
  for (const auto& [v, name] : kValidations) {
    if (v == validation) return name;
  }
  return "unknown";
}

BoxSource parse_box_source(std::string_view name) {
  for (const auto& [s, n] : kSources) {
    if (n == name) return s;
  }
  throw std::invalid_argument("unknown box source: " + std::string(name));
}

Validation parse_validation(std::string_view name) {
  for (const auto& [v, n] : kValidations) {
    if (n == name) return v;
  }
  throw std::invalid_argument("unknown validation strategy: " + std::string(name));
}

bool uses_refinement(Validation v) noexcept {
  return v == Validation::HumanAndActivityAR || v == Validation::VgtFull;
}

LabelRecipe recipe_for(Validation v, double z) {
  return is_product(v) ? LabelRecipe::pedestrian_product(z)
                       : LabelRecipe::single(is_pedestrian_question(), z);
}

double CostTable::stage1_seconds(BoxSource source) const noexcept {
  switch (source) {
    case BoxSource::DirectBox:
      return direct_box;
    case BoxSource::KeypointToBox:
      return keypoint_to_box;
    case BoxSource::Combined:
      return combined_box;
    case BoxSource::DetectorProposals:
      return 0.0;
  }
  return 0.0;
}

double CostTable::validation_seconds(Validation validation) const noexcept {
  switch (validation) {
    case Validation::IsPedestrian11:
      return is_pedestrian;
    case Validation::HumanAndActivity22:
      return human_activity;
    case Validation::HumanAndActivityAR:
      return human_activity_ar;
    case Validation::VgtFull:
      return vgt_full;
  }
  return 0.0;
}

std::int64_t to_millis(double seconds) noexcept { return std::llround(seconds * 1000.0); }

void CostLedger::add(std::string task_id, std::string kind, std::int64_t millis) {
  if (millis < 0) throw std::invalid_argument("negative cost entry");
  total_ += millis;
  entries_.push_back({std::move(task_id), std::move(kind), millis});
}

std::map<std::string, std::int64_t> CostLedger::totals_by_kind() const {
  std::map<std::string, std::int64_t> out;
  for (const auto& e : entries_) out[e.kind] += e.millis;
  return out;
}

std::vector<ReviewBox> review_boxes_from_proposals(std::span<const Proposal> proposals) {
  std::vector<ReviewBox> boxes;
  boxes.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i];
    const std::string id = p.image_id + "/p" + std::to_string(i);
    boxes.push_back({id, p.image_id, p.bbox, p.error_probability, BoxSource::DetectorProposals,
                     p.target == ProposalTarget::OriginalGtBox, id, 1});
  }
  return boxes;
}

std::vector<Microtask> generate_microtasks(Validation validation,
                                           std::span<const ReviewBox> boxes) {
  return make_validation_tasks(validation, boxes, false);
}

std::vector<Microtask> generate_refinement_tasks(Validation validation,
                                                 std::span<const ReviewBox> boxes) {
  return make_validation_tasks(validation, boxes, true);
}

std::vector<Microtask> generate_stage1_tasks(BoxSource source,
                                             std::span<const std::string> image_ids) {
  std::vector<Microtask> tasks;
  const auto add = [&](const std::string& image, MicrotaskKind kind, std::string_view tag) {
    Microtask t;
    t.task_id = image + "/" + std::string(tag);
    t.kind = kind;
    t.image_id = image;
    t.subject_id = image;
    t.assignments = kStage1Annotators;
    tasks.push_back(std::move(t));
  };
  for (const auto& image : image_ids) {
    if (source == BoxSource::DirectBox || source == BoxSource::Combined) {
      add(image, MicrotaskKind::DirectBox, "direct");
    }
    if (source == BoxSource::KeypointToBox || source == BoxSource::Combined) {
      add(image, MicrotaskKind::Keypoint, "keypoints");
    }
  }
  return tasks;
}

SyntheticWorld::SyntheticWorld(std::map<std::string, std::vector<WorldObject>> objects,
                               double match_iou)
    : objects_(std::move(objects)), match_iou_(match_iou) {}

LatentTruth SyntheticWorld::truth_for(const Microtask& task) const {
  static const std::vector<WorldObject> kEmpty;
  const auto it = objects_.find(task.image_id);
  const auto& objects = it == objects_.end() ? kEmpty : it->second;

  if (is_semantic(task.kind)) {
    if (!task.bbox) throw std::invalid_argument("semantic task without a box");
    const WorldObject* best = nullptr;
    double best_iou = 0.0;
    for (const auto& o : objects) {
      const double v = iou(o.box, *task.bbox);
      if (v > best_iou) {
        best_iou = v;
        best = &o;
      }
    }
    if (best != nullptr && best_iou >= match_iou_) return best->semantics;
    return SemanticTruth{0.0, 0.0, std::string(options::kOther)};
  }
  if (task.kind == MicrotaskKind::KeypointBox) {
    if (task.keypoints.empty()) throw std::invalid_argument("keypoint-box task without keypoints");
    Point c{0.0, 0.0};
    for (const auto& p : task.keypoints) {
      c.x += p.x;
      c.y += p.y;
    }
    c.x /= static_cast<double>(task.keypoints.size());
    c.y /= static_cast<double>(task.keypoints.size());
    const WorldObject* o = nearest_object(objects, c);
    if (o == nullptr) throw std::invalid_argument("no object near keypoints in " + task.image_id);
    return o->box;
  }
  ImageTruth truth;
  for (const auto& o : objects) {
    if (o.semantics.human >= 0.5) truth.objects.push_back(o.box);
  }
  return truth;
}

SimulatedSource::SimulatedSource(AnnotatorSimulator simulator, const TruthOracle& truth,
                                 int pool_size)
    : simulator_(std::move(simulator)), truth_(truth), pool_size_(pool_size) {
  if (pool_size_ < 1) throw std::invalid_argument("annotator pool must not be empty");
}

std::vector<AnnotatorResponse> SimulatedSource::collect(std::span<const Microtask> tasks) {
  std::vector<std::string> pool(static_cast<std::size_t>(pool_size_));
  for (int i = 0; i < pool_size_; ++i) {
    std::string id = std::to_string(i);
    pool[static_cast<std::size_t>(i)] = "ann-" + std::string(3 - std::min<std::size_t>(3, id.size()), '0') + id;
  }

  std::vector<AnnotatorResponse> out;
  for (const auto& task : tasks) {
    std::vector<std::string> chosen = pool;
    std::mt19937_64 rng(stream_seed(simulator_.model().seed, task.task_id, "pool"));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(std::min<std::size_t>(chosen.size(), static_cast<std::size_t>(task.assignments)));

    const LatentTruth truth = truth_.truth_for(task);
    std::vector<BBox> marked;
    for (const auto& annotator : chosen) {
      AnnotatorResponse r = simulator_.answer(task, truth, annotator, marked);
      if (const auto* boxes = std::get_if<std::vector<BBox>>(&r.answer)) {
        marked.insert(marked.end(), boxes->begin(), boxes->end());
      } else if (const auto* points = std::get_if<std::vector<Point>>(&r.answer)) {
        const auto* image = std::get_if<ImageTruth>(&truth);
        for (const auto& p : *points) {
          const BBox* best = nullptr;
          double best_d = 0.0;
          for (const auto& o : image->objects) {
            const double d = std::hypot(p.x - o.center_x(), p.y - o.center_y());
            if (best == nullptr || d < best_d) {
              best = &o;
              best_d = d;
            }
          }
          if (best != nullptr) marked.push_back(*best);
        }
      }
      clock_ms_ += r.duration_ms;
      r.timestamp_ms = clock_ms_;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<SoftLabeledObject> CorrectionOutcome::soft_labels() const {
  std::vector<const ReviewedBox*> all;
  for (const auto* set : {&accepted, &rejected, &unresolved}) {
    for (const auto& r : *set) all.push_back(&r);
  }
  std::vector<SoftLabeledObject> out;
  out.reserve(all.size());
  for (const auto* r : all) {
    out.push_back({r->box.image_id, r->box.group_id.empty() ? r->box.box_id : r->box.group_id,
                   r->box.bbox, r->label, r->tasks, r->box.multiplicity, {}});
  }
  return out;
}

bool accept(const SoftLabel& label, double threshold) noexcept {
  return label.resolvable && label.p_hat >= threshold;
}

SoftLabel label_from_responses(Validation validation,
                               std::span<const AnnotatorResponse> primary_or_human,
                               std::span<const AnnotatorResponse> activity, double z) {
  const LabelRecipe recipe = recipe_for(validation, z);
  if (!is_product(validation)) return evaluate_recipe(count_tokens(primary_or_human), recipe);
  return evaluate_recipe(pool_counts(count_tokens(primary_or_human, recipe.factors[0].name),
                                     count_tokens(activity, recipe.factors[1].name)),
                         recipe);
}

CorrectionOutcome run_correction(const Strategy& strategy, std::span<const ReviewBox> boxes,
                                 ResponseSource& source, const CorrectionConfig& config) {
  const Validation v = strategy.validation;
  const LabelRecipe recipe = recipe_for(v, config.z);
  CorrectionOutcome outcome;

  std::set<std::string> charged;
  for (const auto& b : boxes) {
    if (b.origin == BoxSource::DetectorProposals || b.original_gt) continue;
    const std::string key = b.group_id.empty() ? b.box_id : b.group_id;
    if (!charged.insert(key).second) continue;
    outcome.ledger.add("stage1:" + key, "stage1_" + std::string(to_string(b.origin)),
                       to_millis(config.costs.stage1_seconds(b.origin)));
  }

  std::unordered_map<std::string, MicrotaskKind> kind_of;
  std::unordered_map<std::string, std::vector<AnnotatorResponse>> by_task;
  const auto run_tasks = [&](const std::vector<Microtask>& tasks) {
    for (const auto& t : tasks) kind_of[t.task_id] = t.kind;
    auto responses = source.collect(tasks);
    std::unordered_map<std::string, int> got;
    for (auto& r : responses) {
      const auto it = kind_of.find(r.task_id);
      if (it == kind_of.end()) continue;
      outcome.ledger.add(r.task_id, std::string(to_string(it->second)), r.duration_ms);
      ++got[r.task_id];
      by_task[r.task_id].push_back(std::move(r));
    }
    for (const auto& t : tasks) {
      if (got[t.task_id] < t.assignments) outcome.source_exhausted = true;
    }
  };

  run_tasks(generate_microtasks(v, boxes));

  const auto counts_for = [&](const ReviewBox& b, bool refine) {
    const auto ids = task_ids_for(v, b.box_id, refine);
    if (!is_product(v)) return count_tokens(by_task[ids[0]]);
    return pool_counts(count_tokens(by_task[ids[0]], recipe.factors[0].name),
                       count_tokens(by_task[ids[1]], recipe.factors[1].name));
  };

  std::vector<ResponseCounts> counts(boxes.size());
  std::vector<bool> refined(boxes.size(), false);
  for (std::size_t i = 0; i < boxes.size(); ++i) counts[i] = counts_for(boxes[i], false);

  if (uses_refinement(v)) {
    // Both questions get a second batch when either one is ambiguous.
    std::vector<ReviewBox> to_refine;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto ids = task_ids_for(v, boxes[i].box_id, false);
      const SoftLabel h = label_from_counts(count_tokens(by_task[ids[0]]), recipe.factors[0], config.z);
      const SoftLabel a = label_from_counts(count_tokens(by_task[ids[1]]), recipe.factors[1], config.z);
      if (needs_refinement(h, config.band) || needs_refinement(a, config.band)) {
        to_refine.push_back(boxes[i]);
        which.push_back(i);
      }
    }
    if (!to_refine.empty()) {
      run_tasks(generate_refinement_tasks(v, to_refine));
      for (std::size_t i : which) {
        counts[i] = pool_counts(counts[i], counts_for(boxes[i], true));
        refined[i] = true;
      }
    }
    outcome.refined_boxes = static_cast<int>(which.size());
  }

  const auto task_list = [&](const ReviewBox& b, bool was_refined) {
    auto ids = task_ids_for(v, b.box_id, false);
    if (was_refined) {
      const auto extra = task_ids_for(v, b.box_id, true);
      ids.insert(ids.end(), extra.begin(), extra.end());
    }
    return ids;
  };

  std::vector<ReviewedBox> reviewed;
  if (v == Validation::VgtFull) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const std::string key = boxes[i].group_id.empty() ? boxes[i].box_id : boxes[i].group_id;
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(i);
    }
    for (const auto& key : order) {
      std::vector<SoftLabeledObject> members;
      for (std::size_t i : groups[key]) {
        members.push_back({boxes[i].image_id, key, boxes[i].bbox,
                           evaluate_recipe(counts[i], recipe, refined[i]),
                           task_list(boxes[i], refined[i]), boxes[i].multiplicity, {}});
      }
      const SoftLabeledObject merged = aggregate_duplicate_group(members, recipe);
      const auto rep = std::find_if(groups[key].begin(), groups[key].end(), [&](std::size_t i) {
        return boxes[i].bbox == merged.bbox && boxes[i].multiplicity == merged.multiplicity;
      });
      ReviewBox box = boxes[rep == groups[key].end() ? groups[key].front() : *rep];
      box.group_id = key;
      reviewed.push_back({box, merged.label, merged.tasks});
    }
  } else {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      reviewed.push_back(
          {boxes[i], evaluate_recipe(counts[i], recipe, refined[i]), task_list(boxes[i], refined[i])});
    }
  }

  for (auto& r : reviewed) {
    if (!r.label.resolvable) {
      outcome.unresolved.push_back(std::move(r));
    } else if (accept(r.label, strategy.acceptance_threshold)) {
      outcome.accepted.push_back(std::move(r));
    } else {
      outcome.rejected.push_back(std::move(r));
    }
  }
  return outcome;
}

DuplicateResolver iou_resolver(double min_iou) {
  return [min_iou](const BBox&, const BBox&, double v) { return v >= min_iou; };
}

DedupeResult dedupe_merge(std::span<const BBox> a, std::span<const BBox> b,
                          double candidate_iou, const DuplicateResolver& resolver) {
  DedupeResult result;
  for (std::size_t i = 0; i < a.size(); ++i) result.boxes.push_back({a[i], i, false, i});

  struct Candidate {
    std::size_t a;
    std::size_t b;
    double iou;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double v = iou(a[i], b[j]);
      if (v > candidate_iou) candidates.push_back({i, j, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.iou > y.iou; });

  std::vector<std::optional<std::size_t>> group_of_b(b.size());
  for (const auto& c : candidates) {
    if (group_of_b[c.b]) continue;
    if (resolver(a[c.a], b[c.b], c.iou)) group_of_b[c.b] = c.a;
  }

  std::size_t next_group = a.size();
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (group_of_b[j]) {
      result.boxes.push_back({b[j], *group_of_b[j], true, j});
      ++result.duplicates;
    } else {
      result.boxes.push_back({b[j], next_group++, true, j});
    }
  }
  result.group_count = next_group;
  return result;
}

std::vector<std::vector<std::size_t>> cluster_keypoints(std::span<const Point> points,
                                                        double radius) {
  std::vector<std::size_t> parent(points.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (std::hypot(points[i].x - points[j].x, points[i].y - points[j].y) <= radius) {
        const auto ri = find(i);
        const auto rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto root = find(i);
    const auto [it, fresh] = slot.emplace(root, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

BBox median_box(std::span<const BBox> boxes) {
  if (boxes.empty()) throw std::invalid_argument("median of no boxes");
  const auto median = [&](auto coord) {
    std::vector<double> v;
    v.reserve(boxes.size());
    for (const auto& b : boxes) v.push_back(coord(b));
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return {median([](const BBox& b) { return b.left(); }),
          median([](const BBox& b) { return b.top(); }),
          median([](const BBox& b) { return b.right(); }),
          median([](const BBox& b) { return b.bottom(); })};
}

std::vector<ReviewBox> collect_boxes(BoxSource source, std::span<const std::string> image_ids,
                                     ResponseSource& responses, const Stage1Config& config) {
  if (source == BoxSource::DetectorProposals) {
    throw std::invalid_argument("detector proposals are not collected from annotators");
  }
  const bool want_direct = source == BoxSource::DirectBox || source == BoxSource::Combined;
  const bool want_keypoints = source == BoxSource::KeypointToBox || source == BoxSource::Combined;

  std::map<std::string, std::vector<BBox>> direct;
  std::map<std::string, std::vector<Point>> points;
  const auto stage1 = generate_stage1_tasks(source, image_ids);
  for (const auto& r : responses.collect(stage1)) {
    const auto image = r.task_id.substr(0, r.task_id.rfind('/'));
    if (const auto* boxes = std::get_if<std::vector<BBox>>(&r.answer)) {
      auto& dst = direct[image];
      dst.insert(dst.end(), boxes->begin(), boxes->end());
    } else if (const auto* pts = std::get_if<std::vector<Point>>(&r.answer)) {
      auto& dst = points[image];
      dst.insert(dst.end(), pts->begin(), pts->end());
    }
  }

  // Keypoint groups become box-drawing tasks; their boxes are aggregated.
  std::map<std::string, std::vector<std::pair<BBox, int>>> keypoint_boxes;
  if (want_keypoints) {
    std::vector<Microtask> box_tasks;
    for (const auto& image : image_ids) {
      const auto& pts = points[image];
      double radius = config.keypoint_radius_px;
      if (const auto it = direct.find(image); it != direct.end() && !it->second.empty()) {
        std::vector<double> heights;
        for (const auto& b : it->second) heights.push_back(b.height());
        std::nth_element(heights.begin(), heights.begin() + heights.size() / 2, heights.end());
        radius = 0.5 * heights[heights.size() / 2];
      }
      const auto groups = cluster_keypoints(pts, radius);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        Microtask t;
        t.task_id = image + "/kb" + std::to_string(g);
        t.kind = MicrotaskKind::KeypointBox;
        t.image_id = image;
        t.subject_id = image;
        t.assignments = kStage1Annotators;
        for (std::size_t k : groups[g]) t.keypoints.push_back(pts[k]);
        box_tasks.push_back(std::move(t));
      }
    }
    std::map<std::string, std::vector<BBox>> drawn;
    for (const auto& r : responses.collect(box_tasks)) {
      if (const auto* b = std::get_if<BBox>(&r.answer)) drawn[r.task_id].push_back(*b);
    }
    for (const auto& t : box_tasks) {
      const auto& boxes = drawn[t.task_id];
      if (boxes.empty()) continue;
      keypoint_boxes[t.image_id].push_back({median_box(boxes), static_cast<int>(boxes.size())});
    }
  }

  std::vector<ReviewBox> out;
  for (const auto& image : image_ids) {
    const auto& kp = keypoint_boxes[image];
    const auto& dir = direct[image];
    if (source == BoxSource::Combined) {
      std::vector<BBox> a;
      for (const auto& [b, n] : kp) a.push_back(b);
      const auto merged = dedupe_merge(a, dir, config.candidate_iou, config.resolver);
      for (const auto& g : merged.boxes) {
        const std::string id = image + (g.from_b ? "/d" : "/k") + std::to_string(g.index);
        out.push_back({id, image, g.box, 0.0, BoxSource::Combined, false,
                       image + "/g" + std::to_string(g.group), g.from_b ? 1 : kp[g.index].second});
      }
      continue;
    }
    if (want_keypoints) {
      for (std::size_t k = 0; k < kp.size(); ++k) {
        const std::string id = image + "/k" + std::to_string(k);
        out.push_back({id, image, kp[k].first, 0.0, source, false, id, kp[k].second});
      }
    }
    if (want_direct) {
      for (std::size_t k = 0; k < dir.size(); ++k) {
        const std::string id = image + "/d" + std::to_string(k);
        out.push_back({id, image, dir[k], 0.0, source, false, id, 1});
      }
    }
  }
  return out;
}

CorrectedDataset emit_corrected_dataset(const CorrectionOutcome& outcome,
                                        const LabelSet& original) {
  CorrectedDataset out;
  out.labels = original;
  for (const auto& r : outcome.accepted) {
    if (r.box.original_gt) continue;
    out.labels[r.box.image_id].push_back(
        make_box_record(std::string(kPedestrianClass), r.box.bbox));
  }
  out.sidecar = outcome.soft_labels();
  return out;
}

}  // namespace recd
