#include "recd/annotator_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recd {

std::map<MicrotaskKind, double> AnnotatorModel::default_mean_seconds() {
  // Per-box costs divided by the responses that produce one box.
  return {
      {MicrotaskKind::DirectBox, 44.11},
      {MicrotaskKind::Keypoint, 11.12 / 3.0},
      {MicrotaskKind::KeypointBox, (92.671 - 11.12) / 3.0},
      {MicrotaskKind::IsPedestrian, 37.87 / 11.0},
      {MicrotaskKind::IsHuman, 57.03 / 22.0},
      {MicrotaskKind::Activity, 57.03 / 22.0},
  };
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view a, std::string_view b) {
  // FNV-1a over the keys, then a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  const auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  feed(a);
  feed(b);
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

AnnotatorSimulator::AnnotatorSimulator(AnnotatorModel model) : model_(std::move(model)) {
  if (model_.accuracy < 0.0 || model_.accuracy > 1.0 || model_.cant_solve_rate < 0.0 ||
      model_.cant_solve_rate > 1.0) {
    throw std::invalid_argument("accuracy and cant_solve_rate must lie in [0, 1]");
  }
}

namespace {

bool draw(std::mt19937_64& rng, double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

bool marked(const BBox& object, const std::vector<BBox>& already) {
  return std::any_of(already.begin(), already.end(),
                     [&](const BBox& m) { return iou(object, m) >= 0.5; });
}

}  // namespace

std::string AnnotatorSimulator::semantic_answer(MicrotaskKind kind, const SemanticTruth& truth,
                                                std::mt19937_64& rng) const {
  if (draw(rng, model_.cant_solve_rate)) return std::string(options::kCantSolve);

  std::string_view perceived;
  switch (kind) {
    case MicrotaskKind::IsHuman:
      perceived = draw(rng, truth.human) ? options::kYes : options::kNo;
      break;
    case MicrotaskKind::IsPedestrian:
      perceived = draw(rng, truth.human * truth.walking) ? options::kYes : options::kNo;
      break;
    case MicrotaskKind::Activity:
      perceived = draw(rng, truth.walking) ? options::kWalking
                                           : std::string_view(truth.other_activity);
      break;
    default:
      throw std::invalid_argument("not a semantic task kind");
  }
  if (draw(rng, model_.accuracy)) return std::string(perceived);

  std::vector<std::string_view> wrong;
  for (auto opt : answer_options(kind)) {
    if (opt != perceived && opt != options::kCantSolve) wrong.push_back(opt);
  }
  std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
  return std::string(wrong[pick(rng)]);
}

std::int64_t AnnotatorSimulator::sample_duration_ms(MicrotaskKind kind,
                                                    std::mt19937_64& rng) const {
  const auto it = model_.mean_seconds.find(kind);
  const double mean = it == model_.mean_seconds.end() ? 3.0 : it->second;
  const double sigma = model_.duration_sigma;
  std::lognormal_distribution<double> dist(std::log(mean) - 0.5 * sigma * sigma, sigma);
  return std::max<std::int64_t>(1, std::llround(dist(rng) * 1000.0));
}

BBox AnnotatorSimulator::jitter_box(const BBox& box, std::mt19937_64& rng) const {
  if (model_.box_jitter <= 0.0) return box;
  std::normal_distribution<double> nx(0.0, model_.box_jitter * box.width());
  std::normal_distribution<double> ny(0.0, model_.box_jitter * box.height());
  for (int attempt = 0; attempt < 16; ++attempt) {
    const double l = box.left() + nx(rng);
    const double t = box.top() + ny(rng);
    const double r = box.right() + nx(rng);
    const double b = box.bottom() + ny(rng);
    if (l < r && t < b) return {l, t, r, b};
  }
  return box;
}

AnnotatorResponse AnnotatorSimulator::answer(const Microtask& task, const LatentTruth& truth,
                                             std::string_view annotator_id,
                                             const std::vector<BBox>& already_marked) const {
  std::mt19937_64 rng(stream_seed(model_.seed, task.task_id, annotator_id));
  AnnotatorResponse r;
  r.task_id = task.task_id;
  r.annotator_id = std::string(annotator_id);

  if (is_semantic(task.kind)) {
    const auto* sem = std::get_if<SemanticTruth>(&truth);
    if (sem == nullptr) throw std::invalid_argument("semantic task needs semantic truth");
    r.answer = semantic_answer(task.kind, *sem, rng);
  } else if (task.kind == MicrotaskKind::KeypointBox) {
    const auto* box = std::get_if<BBox>(&truth);
    if (box == nullptr) throw std::invalid_argument("keypoint-box task needs a target box");
    r.answer = jitter_box(*box, rng);
  } else {
    const auto* image = std::get_if<ImageTruth>(&truth);
    if (image == nullptr) throw std::invalid_argument("localization task needs image truth");
    if (task.kind == MicrotaskKind::DirectBox) {
      std::vector<BBox> drawn;
      for (const auto& obj : image->objects) {
        if (marked(obj, already_marked) || !draw(rng, model_.recall)) continue;
        drawn.push_back(jitter_box(obj, rng));
      }
      r.answer = std::move(drawn);
    } else {
      std::vector<Point> points;
      for (const auto& obj : image->objects) {
        if (marked(obj, already_marked) || !draw(rng, model_.recall)) continue;
        std::normal_distribution<double> nx(0.0, model_.keypoint_jitter * obj.width());
        std::normal_distribution<double> ny(0.0, model_.keypoint_jitter * obj.height());
        points.push_back({obj.center_x() + nx(rng), obj.center_y() + ny(rng)});
      }
      r.answer = std::move(points);
    }
  }
  r.duration_ms = sample_duration_ms(task.kind, rng);
  return r;
}

}  // namespace recd
