#include "recd/evaluation.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace recd {

using nlohmann::json;

namespace {

const std::vector<LabeledObject>& objects_of(const LabelSet& labels, const std::string& image) {
  static const std::vector<LabeledObject> kEmpty;
  const auto it = labels.find(image);
  return it == labels.end() ? kEmpty : it->second;
}

std::vector<BBox> pedestrians(const LabelSet& labels, const std::string& image) {
  return boxes_of_class(objects_of(labels, image), kPedestrianClass);
}

std::set<std::string> image_union(const SoftLabelsByImage& a, const LabelSet& b) {
  std::set<std::string> ids;
  for (const auto& [id, v] : a) ids.insert(id);
  for (const auto& [id, v] : b) ids.insert(id);
  return ids;
}

}  // namespace

SoftLabelsByImage group_by_image(std::span<const SoftLabeledObject> objects) {
  SoftLabelsByImage out;
  for (const auto& o : objects) out[o.image_id].push_back(o);
  return out;
}

ErrorCountReport count_errors(const SoftLabelsByImage& vgt, const LabelSet& gt,
                              const ErrorCountConfig& config) {
  ErrorCountReport report;
  report.config = config;
  BoxFilter filter;
  filter.min_height = config.min_height;
  filter.dontcare_rule = config.dontcare_rule;

  for (const auto& image : image_union(vgt, gt)) {
    const auto reference = pedestrians(gt, image);
    report.original_gt += reference.size();
    const auto it = vgt.find(image);
    if (it == vgt.end()) continue;

    std::vector<BBox> confident;
    for (const auto& o : it->second) {
      if (o.label.p_hat >= config.p_threshold) confident.push_back(o.bbox);
    }
    const auto dontcare = config.dontcare_excluded
                              ? boxes_of_class(objects_of(gt, image), kDontCareClass)
                              : std::vector<BBox>{};
    std::vector<BBox> kept;
    for (std::size_t i : filter_boxes(confident, dontcare, filter)) kept.push_back(confident[i]);
    report.validated += kept.size();

    for (const auto status : classify_errors(kept, reference)) {
      if (status == MatchStatus::Overlooked) ++report.overlooked;
      if (status == MatchStatus::Misfitting) ++report.misfitting;
    }
  }
  report.fn_total = report.overlooked + report.misfitting;
  report.fnr = report.original_gt == 0 && report.fn_total == 0
                   ? 0.0
                   : static_cast<double>(report.fn_total) /
                         static_cast<double>(report.fn_total + report.original_gt);
  return report;
}

double fnr(std::size_t fn_total, std::size_t original_count) {
  if (original_count == 0) throw std::invalid_argument("fnr needs original boxes");
  return static_cast<double>(fn_total) / static_cast<double>(fn_total + original_count);
}

double fnr(const ErrorCountReport& report) { return fnr(report.fn_total, report.original_gt); }

std::vector<ErrorCountConfig> table3_grid() {
  std::vector<ErrorCountConfig> grid;
  for (bool excluded : {false, true}) {
    for (double p : {0.5, 0.8}) {
      for (double h : {0.0, 25.0, 40.0}) grid.push_back({p, h, excluded, DontCareRule::Iou});
    }
  }
  return grid;
}

std::vector<ErrorCountReport> count_error_grid(const SoftLabelsByImage& vgt, const LabelSet& gt,
                                               std::span<const ErrorCountConfig> grid) {
  std::vector<ErrorCountReport> out;
  out.reserve(grid.size());
  for (const auto& c : grid) out.push_back(count_errors(vgt, gt, c));
  return out;
}

void write_error_counts_csv(std::ostream& out, std::span<const ErrorCountReport> reports) {
  out << "p_threshold,min_height,dontcare_excluded,overlooked,misfitting,fn_total,original_gt,fnr\n";
  for (const auto& r : reports) {
    out << format_number(r.config.p_threshold) << ',' << format_number(r.config.min_height) << ','
        << (r.config.dontcare_excluded ? 1 : 0) << ',' << r.overlooked << ',' << r.misfitting << ','
        << r.fn_total << ',' << r.original_gt << ',' << format_number(r.fnr) << '\n';
  }
}

SoftLabelsByImage vgt_only_boxes(const SoftLabelsByImage& vgt, const LabelSet& gt,
                                 const FoundErrorConfig& config) {
  SoftLabelsByImage out;
  for (const auto& [image, objects] : vgt) {
    std::vector<const SoftLabeledObject*> kept;
    std::vector<BBox> boxes;
    for (const auto& o : objects) {
      if (o.label.p_hat < config.p_threshold || o.bbox.height() < config.min_height) continue;
      kept.push_back(&o);
      boxes.push_back(o.bbox);
    }
    const auto reference = pedestrians(gt, image);
    const auto match = greedy_match(boxes, reference, config.gt_iou);
    for (std::size_t i : match.unmatched_a) out[image].push_back(*kept[i]);
  }
  return out;
}

std::vector<bool> found_error_flags(std::span<const CandidateBox> candidates, const LabelSet& gt,
                                    const SoftLabelsByImage& vgt, const FoundErrorConfig& config) {
  std::vector<bool> flags(candidates.size(), false);
  const auto only = vgt_only_boxes(vgt, gt, config);

  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].bbox.height() >= config.min_height) {
      by_image[candidates[i].image_id].push_back(i);
    }
  }
  for (const auto& [image, idx] : by_image) {
    const auto it = only.find(image);
    if (it == only.end()) continue;
    std::vector<BBox> boxes;
    for (std::size_t i : idx) boxes.push_back(candidates[i].bbox);
    const auto vs_gt = greedy_match(boxes, pedestrians(gt, image), config.gt_iou);

    std::vector<BBox> unmatched;
    for (std::size_t k : vs_gt.unmatched_a) unmatched.push_back(boxes[k]);
    std::vector<BBox> targets;
    for (const auto& o : it->second) targets.push_back(o.bbox);
    const auto vs_vgt = greedy_match(unmatched, targets, config.vgt_iou);
    for (const auto& pair : vs_vgt.pairs) flags[idx[vs_gt.unmatched_a[pair.a]]] = true;
  }
  return flags;
}

std::size_t found_label_errors(std::span<const CandidateBox> candidates, const LabelSet& gt,
                               const SoftLabelsByImage& vgt, const FoundErrorConfig& config) {
  const auto flags = found_error_flags(candidates, gt, vgt, config);
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

std::size_t introduced_errors(std::span<const SoftLabeledObject> strategy,
                              const SoftLabelsByImage& vgt, double p_threshold,
                              double match_iou) {
  const auto accepts = [p_threshold](const SoftLabel& l) {
    return l.resolvable && l.p_hat >= p_threshold;
  };
  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < strategy.size(); ++i) by_image[strategy[i].image_id].push_back(i);

  std::size_t errors = 0;
  for (const auto& [image, idx] : by_image) {
    std::vector<BBox> boxes;
    for (std::size_t i : idx) boxes.push_back(strategy[i].bbox);
    std::vector<BBox> targets;
    const auto it = vgt.find(image);
    if (it != vgt.end()) {
      for (const auto& o : it->second) targets.push_back(o.bbox);
    }
    std::vector<std::optional<bool>> reference(boxes.size());
    if (!targets.empty() && !boxes.empty()) {
      for (const auto& pair : greedy_match(boxes, targets, match_iou).pairs) {
        reference[pair.a] = accepts(it->second[pair.b].label);
      }
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (accepts(strategy[idx[k]].label) != reference[k].value_or(false)) ++errors;
    }
  }
  return errors;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 20; i >= 0; --i) t.push_back(i / 20.0);
  return t;
}

std::vector<CurvePoint> cost_error_curve(std::span<const CandidateBox> candidates,
                                         std::span<const double> thresholds, const LabelSet& gt,
                                         const SoftLabelsByImage& vgt, const CurveConfig& config) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (thresholds[i] > thresholds[i - 1]) throw std::invalid_argument("thresholds must not increase");
  }
  const double per_box = config.validation_seconds + config.stage1_seconds;
  std::vector<CurvePoint> curve;
  for (double t : thresholds) {
    CurvePoint point;
    point.threshold = t;
    std::vector<CandidateBox> accepted;
    std::vector<SoftLabeledObject> verdicts;
    for (const auto& c : candidates) {
      if (!(c.score > t)) continue;
      ++point.reviewed;
      if (!c.label) {
        accepted.push_back(c);
        continue;
      }
      verdicts.push_back({c.image_id, {}, c.bbox, *c.label, {}, 1, {}});
      if (c.label->resolvable && c.label->p_hat >= config.found.p_threshold) accepted.push_back(c);
    }
    point.cost_seconds = per_box * static_cast<double>(point.reviewed);
    point.found_fn = found_label_errors(accepted, gt, vgt, config.found);
    point.introduced_errors = introduced_errors(verdicts, vgt, config.found.p_threshold);
    curve.push_back(point);
  }
  return curve;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "threshold,cost_seconds,found_fn,introduced_errors,reviewed\n";
  for (const auto& p : curve) {
    out << format_number(p.threshold) << ',' << format_number(p.cost_seconds) << ',' << p.found_fn
        << ',' << p.introduced_errors << ',' << p.reviewed << '\n';
  }
}

AuditSample audit_sample(const LabelSet& labels, std::size_t n, std::uint64_t seed,
                         double image_width, double image_height) {
  if (n > labels.size()) throw std::invalid_argument("audit sample larger than the dataset");
  std::vector<std::string> ids;
  for (const auto& [id, objects] : labels) ids.push_back(id);
  std::vector<std::string> chosen;
  std::mt19937_64 rng(seed);
  std::sample(ids.begin(), ids.end(), std::back_inserter(chosen), n, rng);

  AuditSample sample;
  sample.seed = seed;
  for (const auto& id : chosen) {
    AuditImage image{id, {}};
    for (const auto& box : pedestrians(labels, id)) {
      const double hw = 0.75 * box.width();
      const double hh = 0.75 * box.height();
      const double l = std::max(0.0, box.center_x() - hw);
      const double t = std::max(0.0, box.center_y() - hh);
      const double r = std::min(image_width, box.center_x() + hw);
      const double b = std::min(image_height, box.center_y() + hh);
      image.crops.push_back({box, (l < r && t < b) ? BBox(l, t, r, b) : box});
    }
    sample.images.push_back(std::move(image));
  }
  return sample;
}

void write_audit_manifest(std::ostream& out, const AuditSample& sample) {
  const auto arr = [](const BBox& b) {
    return json::array({b.left(), b.top(), b.right(), b.bottom()});
  };
  json images = json::array();
  for (const auto& image : sample.images) {
    json crops = json::array();
    for (const auto& c : image.crops) crops.push_back({{"bbox", arr(c.box)}, {"crop", arr(c.crop)}});
    images.push_back({{"image_id", image.image_id}, {"crops", crops}});
  }
  out << json{{"seed", sample.seed}, {"n_images", sample.images.size()}, {"images", images}}.dump(2)
      << '\n';
}

double audit_rate(std::size_t k, std::size_t n) {
  if (n == 0) throw std::invalid_argument("audit rate needs reviewed boxes");
  if (k > n) throw std::invalid_argument("more verdicts than reviewed boxes");
  return static_cast<double>(k) / static_cast<double>(n);
}

FalsePositiveReport false_positive_analysis(const LabelSet& gt, const SoftLabelsByImage& vgt,
                                            double p_threshold, double match_iou) {
  FalsePositiveReport report;
  for (const auto& [image, objects] : gt) {
    const auto boxes = pedestrians(gt, image);
    report.gt_boxes += boxes.size();
    const auto it = vgt.find(image);
    for (const auto& box : boxes) {
      const SoftLabeledObject* best = nullptr;
      double best_iou = 0.0;
      if (it != vgt.end()) {
        for (const auto& o : it->second) {
          const double v = iou(box, o.bbox);
          if (v >= match_iou && v > best_iou) {
            best_iou = v;
            best = &o;
          }
        }
      }
      if (best == nullptr) {
        ++report.without_partner;
      } else if (best->label.p_hat < p_threshold) {
        ++report.below_threshold;
      }
    }
  }
  return report;
}

}  // namespace recd
