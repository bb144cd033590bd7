// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected values come from the oracles in support/, never from the
// code under test.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"
#include "recd/annotation_service.hpp"
#include "recd/boosting.hpp"
#include "recd/correction.hpp"
#include "recd/evaluation.hpp"
#include "recd/geometry.hpp"
#include "recd/proposal_scoring.hpp"
#include "recd/softlabel.hpp"

using namespace recd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("%s %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("recd_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

class RecordingSource : public ResponseSource {
 public:
  explicit RecordingSource(ResponseSource& inner) : inner_(inner) {}
  std::vector<AnnotatorResponse> collect(std::span<const Microtask> tasks) override {
    auto out = inner_.collect(tasks);
    responses.insert(responses.end(), out.begin(), out.end());
    return out;
  }
  std::vector<AnnotatorResponse> responses;

 private:
  ResponseSource& inner_;
};

// One object per 60 px slot, 20 slots per image.
struct SemanticFixture {
  std::map<std::string, std::vector<WorldObject>> world;
  std::vector<ReviewBox> boxes;       // one box per object
  std::vector<ReviewBox> duplicated;  // two boxes per object sharing a group
  SoftLabelsByImage vgt;              // truth as soft labels, p = human * walking
  LabelSet gt;                        // original labels: everything accepted by the truth minus errors
  std::vector<bool> is_error;         // per object: a pedestrian missing from gt
};

SemanticFixture semantic_fixture(oracle::Rng& rng, int objects,
                                 const std::function<SemanticTruth(int, oracle::Rng&)>& truth,
                                 const std::function<bool(int)>& error) {
  SemanticFixture f;
  for (int i = 0; i < objects; ++i) {
    const auto image = fixture::image_name(i / 20);
    const double l = 60.0 * (i % 20) + 5.0;
    const double h = rng.uniform(40, 120);
    const BBox box(l, 100, l + 0.4 * h, 100 + h);
    const SemanticTruth s = truth(i, rng);
    f.world[image].push_back({box, s});
    const std::string id = image + "/o" + std::to_string(i);
    f.boxes.push_back({id, image, box, 0.5, BoxSource::DetectorProposals, false, id, 1});
    const BBox twin(l + 1, 101, l + 0.4 * h + 1, 101 + h);
    f.duplicated.push_back({id + "/k", image, box, 0.5, BoxSource::Combined, false, id, 3});
    f.duplicated.push_back({id + "/d", image, twin, 0.5, BoxSource::Combined, false, id, 1});
    f.vgt[image].push_back(fixture::soft(image, box, s.human * s.walking));
    const bool missing = error(i);
    f.is_error.push_back(missing);
    if (!missing && s.human * s.walking >= 0.5) {
      f.gt[image].push_back(make_box_record("Pedestrian", box));
    }
  }
  return f;
}

double mean_width(const CorrectionOutcome& out) {
  double sum = 0.0;
  int n = 0;
  for (const auto& o : out.soft_labels()) {
    if (!o.label.resolvable) continue;
    sum += o.label.ci_width();
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

CorrectionOutcome simulate(const SemanticFixture& f, std::span<const ReviewBox> boxes,
                           const Strategy& s, double accuracy, std::uint64_t seed,
                           std::vector<AnnotatorResponse>* recorded = nullptr) {
  SyntheticWorld world(f.world);
  AnnotatorModel m;
  m.accuracy = accuracy;
  m.seed = seed;
  SimulatedSource sim(AnnotatorSimulator(m), world);
  RecordingSource rec(sim);
  auto out = run_correction(s, boxes, rec);
  if (recorded != nullptr) *recorded = rec.responses;
  return out;
}

// ---------------------------------------------------------------------------

Verdict fnr_arithmetic() {
  const double strict = fnr(293, 896) * 100.0;
  const double relaxed = fnr(862, 896) * 100.0;
  const bool ok = std::abs(strict - 24.6) <= 0.05 && std::abs(relaxed - 49.0) <= 0.05;
  return {ok, fmt("fnr(293,896)=%.4f%% fnr(862,896)=%.4f%%", strict, relaxed)};
}

Verdict table3_logic() {
  oracle::Rng rng(1001);
  int cells = 0;
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = fixture::table3_fixture(rng, 50);
    const auto grid = table3_grid();
    const auto got = count_error_grid(f.vgt, f.gt, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto want = f.expected(grid[i]);
      ++cells;
      exact += got[i].overlooked == want.overlooked && got[i].misfitting == want.misfitting &&
               got[i].original_gt == want.original_gt;
    }
  }

  // Monotonicity over the grid on crowded random inputs.
  int violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    LabelSet gt;
    SoftLabelsByImage vgt;
    for (int i = 0; i < 3; ++i) {
      const auto id = fixture::image_name(i);
      for (int k = 0; k < rng.integer(0, 6); ++k) {
        gt[id].push_back(make_box_record("Pedestrian", oracle::real_box(rng, 150, 10, 60)));
      }
      if (rng.coin(0.5)) gt[id].push_back(make_box_record("DontCare", oracle::real_box(rng, 150, 20, 80)));
      for (int k = 0; k < rng.integer(0, 8); ++k) {
        vgt[id].push_back(fixture::soft(id, oracle::real_box(rng, 150, 10, 60), rng.uniform()));
      }
    }
    const auto grid = table3_grid();
    const auto r = count_error_grid(vgt, gt, grid);
    for (std::size_t a = 0; a < grid.size(); ++a) {
      for (std::size_t b = 0; b < grid.size(); ++b) {
        const auto& ca = grid[a];
        const auto& cb = grid[b];
        if (ca.dontcare_excluded != cb.dontcare_excluded) continue;
        if (cb.p_threshold < ca.p_threshold || cb.min_height < ca.min_height) continue;
        if (r[b].overlooked > r[a].overlooked || r[b].misfitting > r[a].misfitting) ++violations;
      }
    }
  }
  return {exact == cells && violations == 0,
          fmt("%d/%d planted cells exact, %d monotonicity violations over 500 inputs "
              "(released VGT not supplied)",
              exact, cells, violations)};
}

Verdict matching_oracle() {
  oracle::Rng rng(1002);
  int equal = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = oracle::integer_boxes(rng, rng.integer(0, 6), 12);
    const auto b = oracle::integer_boxes(rng, rng.integer(0, 6), 12);
    const double thr = rng.integer(1, 10) / 10.0;
    const auto got = greedy_match(a, b, thr);
    const auto want = oracle::replay_match(a, b, thr);
    bool same = got.pairs.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      same = got.pairs[i].a == std::get<0>(want[i]) && got.pairs[i].b == std::get<1>(want[i]) &&
             got.pairs[i].iou == std::get<2>(want[i]);
    }
    equal += same;
  }
  return {equal == 1000, fmt("%d/1000 instances identical", equal)};
}

Verdict iou_nms_oracles() {
  oracle::Rng rng(1003);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracle::integer_box(rng, 24);
    const auto b = oracle::integer_box(rng, 24);
    worst = std::max(worst, std::abs(iou(a, b) - oracle::raster_iou(a, b)));
  }
  int nms_equal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ScoredBox> boxes;
    for (int k = 0; k < rng.integer(0, 15); ++k) {
      boxes.push_back({oracle::integer_box(rng, 40), rng.integer(0, 8) / 8.0});
    }
    const double thr = rng.uniform(0.1, 0.9);
    nms_equal += nms(boxes, thr) == oracle::reference_nms(boxes, thr);
  }
  return {worst <= 1e-9 && nms_equal == 500,
          fmt("max |iou - raster| = %.3g over 1000 cases, nms %d/500 equal", worst, nms_equal)};
}

Verdict wilson_statistics() {
  double worst = 0.0;
  for (double z : {1.0, 1.645, 1.96, 2.576}) {
    for (int n = 1; n <= 60; ++n) {
      for (int k = 0; k <= n; ++k) {
        const auto got = wilson_interval(k, n, z);
        const auto [lo, hi] = oracle::wilson_counts(k, n, z);
        worst = std::max({worst, std::abs(got.low - lo), std::abs(got.high - hi)});
      }
    }
  }

  oracle::Rng rng(1004);
  double min_cov = 1.0;
  for (int i = 1; i <= 9; ++i) {
    const double p = i / 10.0;
    int covered = 0;
    for (int t = 0; t < 100000; ++t) {
      const auto ci = wilson_interval(rng.binomial(11, p), 11);
      covered += ci.low <= p && p <= ci.high;
    }
    min_cov = std::min(min_cov, covered / 100000.0);
  }

  // Delta-method product interval against the Monte Carlo distribution of
  // the product of two binomial proportions.
  SoftLabel h;
  h.p_hat = 0.8;
  h.n_valid = 22;
  h.resolvable = true;
  SoftLabel a = h;
  a.p_hat = 0.9;
  const double delta_width = product_soft_label(h, a).ci_width();
  std::vector<double> samples(1000000);
  for (auto& s : samples) s = rng.binomial(22, 0.8) / 22.0 * (rng.binomial(22, 0.9) / 22.0);
  std::sort(samples.begin(), samples.end());
  const double mc_width = samples[samples.size() * 975 / 1000] - samples[samples.size() * 25 / 1000];

  const bool ok = worst <= 1e-9 && min_cov >= 0.90 && std::abs(delta_width - mc_width) <= 0.02;
  return {ok, fmt("max closed-form deviation %.3g, min coverage %.4f at n=11, product width "
                  "%.4f vs Monte Carlo %.4f",
                  worst, min_cov, delta_width, mc_width)};
}

SemanticTruth mixed_truth(int, oracle::Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.5) return {1.0, 1.0};
  if (u < 0.75) return {0.0, 0.0, std::string(options::kOther)};
  return {rng.uniform(0.5, 1.0), rng.uniform(0.2, 0.8)};
}

Verdict refinement_trend() {
  int ordered = 0;
  double sums[4] = {0, 0, 0, 0};
  for (int seed = 0; seed < 20; ++seed) {
    oracle::Rng rng(2000 + seed);
    const auto f = semantic_fixture(rng, 200, mixed_truth, [](int) { return false; });
    const std::uint64_t s = 7000 + seed;
    const double w[4] = {
        mean_width(simulate(f, f.boxes, {BoxSource::DetectorProposals, Validation::IsPedestrian11, 0.5}, 0.9, s)),
        mean_width(simulate(f, f.boxes, {BoxSource::DetectorProposals, Validation::HumanAndActivity22, 0.5}, 0.9, s)),
        mean_width(simulate(f, f.boxes, {BoxSource::DetectorProposals, Validation::HumanAndActivityAR, 0.5}, 0.9, s)),
        mean_width(simulate(f, f.duplicated, {BoxSource::Combined, Validation::VgtFull, 0.5}, 0.9, s)),
    };
    for (int k = 0; k < 4; ++k) sums[k] += w[k];
    ordered += w[0] > w[1] && w[1] > w[2] && w[2] > w[3];
  }
  return {ordered >= 11, fmt("ordering held in %d/20 seeds; mean widths %.3f > %.3f > %.3f > %.3f",
                             ordered, sums[0] / 20, sums[1] / 20, sums[2] / 20, sums[3] / 20)};
}

Verdict correction_end_to_end() {
  oracle::Rng rng(1005);
  // Objects 0..9 are pedestrians missing from the labels; the rest are
  // clear non-pedestrians (things or sitting people).
  const auto f = semantic_fixture(
      rng, 50,
      [](int i, oracle::Rng&) {
        if (i < 10) return SemanticTruth{1.0, 1.0};
        if (i % 2 == 0) return SemanticTruth{0.0, 0.0, std::string(options::kOther)};
        return SemanticTruth{1.0, 0.0, std::string(options::kSitting)};
      },
      [](int i) { return i < 10; });
  std::vector<AnnotatorResponse> recorded;
  const auto out = simulate(f, f.boxes, {BoxSource::DetectorProposals, Validation::HumanAndActivityAR, 0.5},
                            1.0, 42, &recorded);
  std::int64_t durations = 0;
  for (const auto& r : recorded) durations += r.duration_ms;
  std::set<std::string> accepted_ids;
  for (const auto& r : out.accepted) accepted_ids.insert(r.box.box_id);
  bool right_ten = accepted_ids.size() == 10;
  for (int i = 0; i < 10; ++i) right_ten = right_ten && accepted_ids.count(f.boxes[i].box_id);
  const auto labels = out.soft_labels();
  const auto introduced = introduced_errors(labels, f.vgt, 0.5);
  const bool ok = right_ten && introduced == 0 && out.ledger.total_millis() == durations;
  return {ok, fmt("accepted %zu (planted 10), introduced %zu, ledger %lld ms vs responses %lld ms",
                  out.accepted.size(), introduced, static_cast<long long>(out.ledger.total_millis()),
                  static_cast<long long>(durations))};
}

struct NetEffect {
  std::size_t found;
  std::size_t introduced;
};

NetEffect net_effect(const SemanticFixture& f, const Strategy& s, double accuracy,
                     std::uint64_t seed) {
  const auto out = simulate(f, f.boxes, s, accuracy, seed);
  std::vector<CandidateBox> accepted;
  for (const auto& r : out.accepted) accepted.push_back({r.box.image_id, r.box.bbox, 1.0, std::nullopt});
  FoundErrorConfig cfg;
  cfg.min_height = 0.0;
  return {found_label_errors(accepted, f.gt, f.vgt, cfg), introduced_errors(out.soft_labels(), f.vgt, 0.5)};
}

Verdict quality_crossover() {
  int held = 0;
  NetEffect single_sum{0, 0};
  NetEffect ar_sum{0, 0};
  for (int seed = 0; seed < 20; ++seed) {
    oracle::Rng rng(3000 + seed);
    // 500 proposals, 10% of them real pedestrians the labels missed. Half of
    // the rest are clear non-humans, half are people doing something ambiguous.
    const auto f = semantic_fixture(
        rng, 500,
        [](int i, oracle::Rng&) {
          if (i % 10 == 0) return SemanticTruth{1.0, 1.0};
          if (i % 2 == 1) return SemanticTruth{0.0, 0.0, std::string(options::kOther)};
          return SemanticTruth{1.0, 0.4, std::string(options::kSitting)};
        },
        [](int i) { return i % 10 == 0; });
    const auto single = net_effect(f, {BoxSource::DetectorProposals, Validation::IsPedestrian11, 0.5},
                                   0.75, 9000 + seed);
    const auto ar = net_effect(f, {BoxSource::DetectorProposals, Validation::HumanAndActivityAR, 0.5},
                               0.9, 9000 + seed);
    single_sum.found += single.found;
    single_sum.introduced += single.introduced;
    ar_sum.found += ar.found;
    ar_sum.introduced += ar.introduced;
    held += single.introduced > single.found && ar.found > ar.introduced;
  }
  return {held >= 16,
          fmt("held in %d/20 seeds; mean single-task@0.75 found %.1f introduced %.1f, "
              "AR@0.9 found %.1f introduced %.1f",
              held, single_sum.found / 20.0, single_sum.introduced / 20.0, ar_sum.found / 20.0,
              ar_sum.introduced / 20.0)};
}

Verdict curves() {
  oracle::Rng rng(1006);
  int curves_checked = 0;
  int violations = 0;
  bool origin = true;
  const auto check = [&](const std::vector<CurvePoint>& c) {
    ++curves_checked;
    origin = origin && c.front().threshold == 1.0 && c.front().cost_seconds == 0.0 &&
             c.front().found_fn == 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (c[i].cost_seconds < c[i - 1].cost_seconds || c[i].found_fn < c[i - 1].found_fn) ++violations;
    }
  };
  const auto t = default_thresholds();

  std::size_t planted_total = 0;
  std::size_t saturated_total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = fixture::missing_box_fixture(rng, 20);
    planted_total += f.missing.size();

    // Perfect oracle: the missing boxes ranked above every existing one.
    std::vector<CandidateBox> perfect;
    for (auto c : f.missing) {
      c.score = rng.uniform(0.5, 0.99);
      perfect.push_back(c);
    }
    for (auto c : f.existing) {
      c.score = rng.uniform(0.0, 0.5);
      perfect.push_back(c);
    }
    const auto pc = cost_error_curve(perfect, t, f.gt, f.vgt, {});
    check(pc);
    saturated_total += pc.back().found_fn;

    // Proposal methods over noisy detections of every VGT box plus clutter.
    std::vector<Detection> dets;
    BoxesByImage gt_boxes;
    for (const auto& [id, objects] : f.gt) {
      for (const auto& o : objects) gt_boxes[id].push_back(o.bbox);
    }
    for (const auto& [id, objects] : f.vgt) {
      for (const auto& o : objects) {
        const double dx = rng.normal(0, 2);
        dets.push_back({id, BBox(o.bbox.left() + dx, o.bbox.top(), o.bbox.right() + dx, o.bbox.bottom()),
                        rng.uniform(0.3, 1.0)});
      }
      for (int k = 0; k < 4; ++k) {
        const double l = rng.uniform(0, 1150);
        dets.push_back({id, BBox(l, 10, l + 20, 60), rng.uniform(0.02, 0.6)});
      }
    }
    for (auto method : {ProposalMethod::Objectness, ProposalMethod::ObjectLab}) {
      std::vector<CandidateBox> cands;
      for (const auto& p : propose(method, dets, gt_boxes)) {
        cands.push_back({p.image_id, p.bbox, p.error_probability, std::nullopt});
      }
      CurveConfig cfg;
      check(cost_error_curve(cands, t, f.gt, f.vgt, cfg));
      cfg.stage1_seconds = 103.79;
      check(cost_error_curve(cands, t, f.gt, f.vgt, cfg));
    }
  }

  // Strategy verdicts on crowded random inputs.
  for (int trial = 0; trial < 300; ++trial) {
    LabelSet gt;
    SoftLabelsByImage vgt;
    std::vector<CandidateBox> cands;
    const auto id = fixture::image_name(0);
    for (int k = 0; k < rng.integer(0, 6); ++k) {
      gt[id].push_back(make_box_record("Pedestrian", oracle::real_box(rng, 120, 10, 60)));
    }
    for (int k = 0; k < rng.integer(0, 8); ++k) {
      vgt[id].push_back(fixture::soft(id, oracle::real_box(rng, 120, 25, 60), rng.uniform()));
    }
    for (int k = 0; k < rng.integer(0, 12); ++k) {
      CandidateBox c{id, oracle::real_box(rng, 120, 10, 60), rng.uniform(), std::nullopt};
      if (rng.coin(0.5)) {
        SoftLabel l;
        l.p_hat = rng.uniform();
        l.resolvable = true;
        c.label = l;
      }
      cands.push_back(c);
    }
    check(cost_error_curve(cands, t, gt, vgt, {}));
  }

  const bool ok = violations == 0 && origin && saturated_total == planted_total;
  return {ok, fmt("%d curves, %d monotonicity violations, origin %s, perfect proposer found "
                  "%zu of %zu planted",
                  curves_checked, violations, origin ? "(0, 0)" : "off", saturated_total,
                  planted_total)};
}

Verdict meta_classifier() {
  oracle::Rng rng(1007);
  const int n = 1200;
  std::vector<MetaFeatures> features(n);
  std::vector<int> correct(n);
  for (int i = 0; i < n; ++i) {
    const bool ok = rng.coin(0.6);
    correct[i] = ok;
    auto& f = features[i];
    // True positives: confident, tall, backed by several overlapping
    // candidates. False positives: the opposite, with a margin between them.
    f[kScore] = ok ? rng.uniform(0.6, 1.0) : rng.uniform(0.0, 0.45);
    f[kHeight] = ok ? rng.uniform(50, 200) : rng.uniform(10, 60);
    f[kWidth] = f[kHeight] * rng.uniform(0.3, 0.5);
    f[kArea] = f[kWidth] * f[kHeight];
    f[kAspect] = f[kWidth] / f[kHeight];
    f[kNeighborCount] = ok ? rng.integer(3, 12) : rng.integer(0, 4);
    f[kNeighborMaxIou] = ok ? rng.uniform(0.6, 0.95) : rng.uniform(0.0, 0.7);
    f[kNeighborMeanIou] = f[kNeighborMaxIou] * rng.uniform(0.5, 1.0);
    f[kNeighborMinIou] = f[kNeighborMeanIou] * rng.uniform(0.2, 1.0);
    f[kCenterX] = rng.uniform();
    f[kCenterY] = rng.uniform(0.3, 0.8);
  }
  MetaConfig cfg;
  cfg.seed = 11;
  const auto cv = train_meta_cv(features, correct, cfg);
  const double oof_auroc = oracle::pairwise_auroc(cv.oof_correct, correct);

  bool partition = static_cast<int>(cv.fold_of.size()) == n;
  std::vector<int> per_fold(cfg.folds, 0);
  for (int f : cv.fold_of) {
    partition = partition && f >= 0 && f < cfg.folds;
    if (f >= 0 && f < cfg.folds) ++per_fold[f];
  }
  const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
  partition = partition && *hi - *lo <= 2 &&
              std::accumulate(per_fold.begin(), per_fold.end(), 0) == n;
  return {oof_auroc >= 0.95 && partition,
          fmt("out-of-fold AUROC %.4f, folds %s (sizes %d..%d)", oof_auroc,
              partition ? "partition the samples" : "do not partition", *lo, *hi)};
}

std::vector<Microtask> service_tasks(int count, int assignments) {
  std::vector<Microtask> tasks;
  for (int i = 0; i < count; ++i) {
    Microtask t;
    t.task_id = "box" + std::to_string(i) + "/is_human";
    t.kind = MicrotaskKind::IsHuman;
    t.image_id = fixture::image_name(i);
    t.bbox = BBox(10, 10, 40, 100);
    t.subject_id = "box" + std::to_string(i);
    t.assignments = assignments;
    t.priority = (i % 7) / 7.0;
    tasks.push_back(t);
  }
  return tasks;
}

Verdict service_durability() {
  const auto dir = scratch("service");

  // Kill a writer mid-stream and check every acknowledged answer survives.
  const auto log = dir / "killed.jsonl";
  {
    AnnotationService svc(log);
    svc.add_tasks(service_tasks(400, 11));
  }
  int fds[2];
  if (::pipe(fds) != 0) return {false, "pipe failed"};
  const pid_t child = ::fork();
  if (child == 0) {
    ::close(fds[0]);
    AnnotationService svc(log);
    for (int a = 0;; ++a) {
      const std::string who = "ann-" + std::to_string(a % 1000);
      const auto t = svc.next_task(who);
      if (!t) continue;
      svc.submit_response(t->task_id, who, std::string(a % 3 ? "Yes" : "No"), 100 + a);
      const std::string line = t->task_id + " " + who + "\n";
      if (::write(fds[1], line.data(), line.size()) < 0) ::_exit(1);
    }
  }
  ::close(fds[1]);
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  ::kill(child, SIGKILL);
  std::string acked_text;
  char buf[4096];
  for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;) acked_text.append(buf, n);
  ::close(fds[0]);
  ::waitpid(child, nullptr, 0);

  std::set<std::pair<std::string, std::string>> acked;
  std::istringstream lines(acked_text);
  for (std::string task, who; lines >> task >> who;) acked.insert({task, who});

  std::size_t lost = 0;
  std::string first;
  {
    AnnotationService replayed(log);
    std::set<std::pair<std::string, std::string>> stored;
    for (const auto& r : replayed.export_responses()) stored.insert({r.task_id, r.annotator_id});
    for (const auto& p : acked) lost += !stored.count(p);
    first = replayed.snapshot();
  }
  AnnotationService again(log);
  const bool identical = again.snapshot() == first;

  // 50 concurrent HTTP clients drain 60 tasks x 11 slots.
  const auto live_log = dir / "live.jsonl";
  AnnotationService svc(live_log);
  svc.add_tasks(service_tasks(60, 11));
  HttpConfig cfg;
  cfg.port = 0;
  cfg.threads = 16;
  HttpServer server(svc, cfg);
  const int port = server.start();
  std::atomic<int> acknowledged{0};
  std::atomic<int> duplicates{0};
  std::atomic<int> errors{0};
  std::vector<std::thread> clients;
  for (int c = 0; c < 50; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client cli("127.0.0.1", port);
      cli.set_read_timeout(30);
      const std::string who = "client-" + std::to_string(c);
      for (;;) {
        auto r = cli.Get("/api/tasks/next?annotator=" + who);
        if (!r) {
          ++errors;
          return;
        }
        if (r->status == 204) return;
        const auto task = json::parse(r->body);
        const json body = {{"task_id", task.at("task_id")}, {"annotator_id", who},
                           {"answer", "Yes"}, {"duration_ms", 1500}};
        // Each answer is posted twice, as a retrying client would.
        for (int attempt = 0; attempt < 2; ++attempt) {
          auto p = cli.Post("/api/responses", body.dump(), "application/json");
          if (!p || p->status != 200) {
            ++errors;
            return;
          }
          const bool dup = json::parse(p->body).at("duplicate").get<bool>();
          if (attempt == 0 && !dup) ++acknowledged;
          if (attempt == 1 && dup) ++duplicates;
        }
      }
    });
  }
  for (auto& t : clients) t.join();
  server.stop();

  const auto stored = svc.export_responses();
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : stored) pairs.insert({r.task_id, r.annotator_id});
  const std::size_t expected = 60 * 11;
  const bool concurrent_ok = errors == 0 && acknowledged == static_cast<int>(expected) &&
                             duplicates == static_cast<int>(expected) &&
                             stored.size() == expected && pairs.size() == expected;
  const std::string live_state = svc.snapshot();
  AnnotationService reopened(live_log);
  const bool live_replay = reopened.snapshot() == live_state;

  fs::remove_all(dir.parent_path());
  const bool ok = lost == 0 && !acked.empty() && identical && concurrent_ok && live_replay;
  return {ok, fmt("killed writer: %zu acknowledged, %zu lost, replay %s; 50 clients: %zu stored "
                  "of %zu, %d acknowledged, %d retries flagged duplicate, %d errors, replay %s",
                  acked.size(), lost, identical ? "identical" : "differs", stored.size(), expected,
                  acknowledged.load(), duplicates.load(), errors.load(),
                  live_replay ? "identical" : "differs")};
}

}  // namespace

int main() {
  report("fnr-arithmetic", fnr_arithmetic);
  report("table3-logic", table3_logic);
  report("matching-oracle", matching_oracle);
  report("iou-nms-oracles", iou_nms_oracles);
  report("wilson-delta-statistics", wilson_statistics);
  report("refinement-trend", refinement_trend);
  report("correction-end-to-end", correction_end_to_end);
  report("quality-crossover", quality_crossover);
  report("curves", curves);
  report("meta-classifier", meta_classifier);
  report("service-durability", service_durability);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
