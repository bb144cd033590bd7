#include "recd/proposal_scoring.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"

namespace recd {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table,
                         Enum value) noexcept {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "unknown";
}

constexpr std::array<std::pair<ScoreMethod, std::string_view>, 4> kScoreMethods{{
    {ScoreMethod::Objectness, "objectness"},
    {ScoreMethod::ObjectLabOverlooked, "objectlab_overlooked"},
    {ScoreMethod::ObjectLabBadLoc, "objectlab_badloc"},
    {ScoreMethod::MetaDetect, "metadetect"},
}};

constexpr std::array<std::pair<ProposalTarget, std::string_view>, 2> kTargets{{
    {ProposalTarget::PredictionBox, "prediction"},
    {ProposalTarget::OriginalGtBox, "original_gt"},
}};

constexpr std::array<std::pair<ProposalMethod, std::string_view>, 4> kMethods{{
    {ProposalMethod::Objectness, "objectness"},
    {ProposalMethod::ObjectLab, "objectlab"},
    {ProposalMethod::MetaDetect, "metadetect"},
    {ProposalMethod::InstanceWiseLoss, "instance-loss"},
}};

const std::vector<BBox>& gt_for(const BoxesByImage& gt, const std::string& image_id) {
  static const std::vector<BBox> kNone;
  const auto it = gt.find(image_id);
  return it == gt.end() ? kNone : it->second;
}

}  // namespace

std::string_view to_string(ScoreMethod method) noexcept { return name_of(kScoreMethods, method); }
std::string_view to_string(ProposalTarget target) noexcept { return name_of(kTargets, target); }
std::string_view to_string(ProposalMethod method) noexcept { return name_of(kMethods, method); }

ScoreMethod parse_score_method(std::string_view name) {
  for (const auto& [e, n] : kScoreMethods) {
    if (n == name) return e;
  }
  throw std::invalid_argument("unknown score method: " + std::string(name));
}

ProposalTarget parse_proposal_target(std::string_view name) {
  for (const auto& [e, n] : kTargets) {
    if (n == name) return e;
  }
  throw std::invalid_argument("unknown proposal target: " + std::string(name));
}

ProposalMethod parse_proposal_method(std::string_view name) {
  for (const auto& [e, n] : kMethods) {
    if (n == name) return e;
  }
  throw UnknownMethod("unknown proposal method: " + std::string(name));
}

void sort_proposals(std::vector<Proposal>& proposals) {
  std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
    return a.error_probability > b.error_probability;
  });
}

std::vector<Proposal> rank_by_objectness(std::span<const Detection> predictions) {
  std::vector<Proposal> out;
  out.reserve(predictions.size());
  for (const auto& d : predictions) {
    out.push_back({d.image_id, d.bbox, d.score, std::clamp(d.score, 0.0, 1.0),
                   ScoreMethod::Objectness, ProposalTarget::PredictionBox});
  }
  sort_proposals(out);
  return out;
}

std::vector<Proposal> objectlab_scores(std::span<const Detection> predictions,
                                       const BoxesByImage& gt) {
  std::vector<Proposal> out;
  std::map<std::string, std::vector<std::size_t>> preds_by_image;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& d = predictions[i];
    double best = 0.0;
    for (const auto& g : gt_for(gt, d.image_id)) best = std::max(best, iou(d.bbox, g));
    const double conf = std::clamp(d.score, 0.0, 1.0);
    out.push_back({d.image_id, d.bbox, d.score, conf * (1.0 - best),
                   ScoreMethod::ObjectLabOverlooked, ProposalTarget::PredictionBox});
    preds_by_image[d.image_id].push_back(i);
  }
  for (const auto& [image_id, boxes] : gt) {
    const auto it = preds_by_image.find(image_id);
    for (const auto& g : boxes) {
      double support = 0.0;
      if (it != preds_by_image.end()) {
        for (std::size_t i : it->second) {
          const auto& d = predictions[i];
          support = std::max(support, iou(d.bbox, g) * std::clamp(d.score, 0.0, 1.0));
        }
      }
      out.push_back({image_id, g, 0.0, 1.0 - support, ScoreMethod::ObjectLabBadLoc,
                     ProposalTarget::OriginalGtBox});
    }
  }
  return out;
}

std::vector<MetaSample> extract_meta_features(std::span<const ScoredBox> pre_nms,
                                              const ImageSize& image, double nms_iou) {
  if (!(image.width > 0.0) || !(image.height > 0.0)) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  std::vector<MetaSample> out;
  for (std::size_t i : nms(pre_nms, nms_iou)) {
    const auto& box = pre_nms[i].box;
    MetaFeatures f{};
    f[kScore] = pre_nms[i].score;
    f[kWidth] = box.width();
    f[kHeight] = box.height();
    f[kArea] = box.area();
    f[kAspect] = box.width() / box.height();
    double count = 0.0;
    double max_iou = 0.0;
    double sum_iou = 0.0;
    double min_iou = 0.0;
    for (std::size_t j = 0; j < pre_nms.size(); ++j) {
      if (j == i) continue;
      const double v = iou(box, pre_nms[j].box);
      if (v <= 0.0) continue;
      min_iou = count == 0.0 ? v : std::min(min_iou, v);
      count += 1.0;
      max_iou = std::max(max_iou, v);
      sum_iou += v;
    }
    f[kNeighborCount] = count;
    f[kNeighborMaxIou] = max_iou;
    f[kNeighborMeanIou] = count > 0.0 ? sum_iou / count : 0.0;
    f[kNeighborMinIou] = min_iou;
    f[kCenterX] = box.center_x() / image.width;
    f[kCenterY] = box.center_y() / image.height;
    out.push_back({i, f});
  }
  return out;
}

std::vector<int> label_detections(std::span<const Detection> detections, const BoxesByImage& gt,
                                  double iou_threshold) {
  std::vector<int> labels(detections.size(), 0);
  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < detections.size(); ++i) by_image[detections[i].image_id].push_back(i);
  for (const auto& [image_id, idx] : by_image) {
    std::vector<BBox> boxes;
    boxes.reserve(idx.size());
    for (std::size_t i : idx) boxes.push_back(detections[i].bbox);
    const auto match = greedy_match(boxes, gt_for(gt, image_id), iou_threshold);
    for (const auto& p : match.pairs) labels[idx[p.a]] = 1;
  }
  return labels;
}

double FoldModel::predict_correct(const MetaFeatures& features) const {
  MetaFeatures z{};
  for (std::size_t f = 0; f < kMetaFeatureCount; ++f) z[f] = (features[f] - mean[f]) / scale[f];
  return std::visit([&](const auto& m) { return m.predict_proba(z); }, learner);
}

double MetaModel::predict_correct(const MetaFeatures& features) const {
  if (folds.empty()) throw std::logic_error("meta model is untrained");
  double sum = 0.0;
  for (const auto& f : folds) sum += f.predict_correct(features);
  return sum / static_cast<double>(folds.size());
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least two folds");
  std::vector<int> fold_of(labels.size(), 0);
  std::mt19937_64 rng(seed);
  for (int cls : {1, 0}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) {
      fold_of[members[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
  }
  return fold_of;
}

MetaCvResult train_meta_cv(std::span<const MetaFeatures> features, std::span<const int> correct,
                           const MetaConfig& config) {
  if (features.size() != correct.size()) {
    throw std::invalid_argument("feature/label size mismatch");
  }
  const auto positives = std::count(correct.begin(), correct.end(), 1);
  const auto negatives = static_cast<long>(correct.size()) - positives;
  if (positives < config.folds || negatives < config.folds) {
    throw DegenerateFold("meta classifier needs at least " + std::to_string(config.folds) +
                         " true and false positives; got " + std::to_string(positives) + " / " +
                         std::to_string(negatives));
  }

  MetaCvResult result;
  result.model.learner = config.learner;
  result.model.iou_threshold = config.iou_threshold;
  result.fold_of = stratified_folds(correct, config.folds, config.seed);
  result.oof_correct.assign(features.size(), 0.0);

  for (int fold = 0; fold < config.folds; ++fold) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < features.size(); ++i) {
      (result.fold_of[i] == fold ? test : train).push_back(i);
    }
    FoldModel fm{{}, {}, ml::GradientBoostedTrees(config.gbdt)};
    for (std::size_t f = 0; f < kMetaFeatureCount; ++f) {
      double sum = 0.0;
      double sq = 0.0;
      for (std::size_t i : train) {
        sum += features[i][f];
        sq += features[i][f] * features[i][f];
      }
      const double n = static_cast<double>(train.size());
      const double mean = sum / n;
      const double sd = std::sqrt(std::max(sq / n - mean * mean, 0.0));
      fm.mean[f] = mean;
      fm.scale[f] = sd > 1e-12 ? sd : 1.0;
    }
    ml::Rows x;
    std::vector<int> y;
    x.reserve(train.size());
    for (std::size_t i : train) {
      std::vector<double> row(kMetaFeatureCount);
      for (std::size_t f = 0; f < kMetaFeatureCount; ++f) {
        row[f] = (features[i][f] - fm.mean[f]) / fm.scale[f];
      }
      x.push_back(std::move(row));
      y.push_back(correct[i]);
    }
    if (config.learner == MetaLearner::GradientBoosting) {
      ml::GradientBoostedTrees model(config.gbdt);
      model.fit(x, y);
      fm.learner = std::move(model);
    } else {
      ml::LogisticRegression model(config.logistic);
      model.fit(x, y);
      fm.learner = std::move(model);
    }
    std::vector<double> fold_scores;
    std::vector<int> fold_labels;
    for (std::size_t i : test) {
      result.oof_correct[i] = fm.predict_correct(features[i]);
      fold_scores.push_back(result.oof_correct[i]);
      fold_labels.push_back(correct[i]);
    }
    result.fold_auroc.push_back(ml::auroc(fold_scores, fold_labels));
    result.model.folds.push_back(std::move(fm));
  }
  result.oof_error_probability.reserve(features.size());
  for (double p : result.oof_correct) result.oof_error_probability.push_back(1.0 - p);
  return result;
}

std::vector<Proposal> propose(ProposalMethod method, std::span<const Detection> raw_detections,
                              const BoxesByImage& gt, const ProposalConfig& config) {
  if (method == ProposalMethod::InstanceWiseLoss) {
    throw UnsupportedMethod(
        "instance-wise loss scoring needs two-stage detector internals and is not supported");
  }

  // Score filter, then group per image keeping input order.
  std::map<std::string, std::vector<ScoredBox>> per_image;
  for (const auto& d : raw_detections) {
    if (d.score >= config.min_score) per_image[d.image_id].push_back({d.bbox, d.score});
  }

  const double nms_iou = config.apply_nms ? config.nms_iou : 1.0;
  std::vector<Detection> survivors;
  std::vector<MetaFeatures> features;
  for (const auto& [image_id, boxes] : per_image) {
    const auto sit = config.image_sizes.find(image_id);
    const ImageSize size = sit == config.image_sizes.end() ? config.default_image : sit->second;
    for (const auto& s : extract_meta_features(boxes, size, nms_iou)) {
      survivors.push_back({image_id, boxes[s.index].box, boxes[s.index].score});
      features.push_back(s.features);
    }
  }

  switch (method) {
    case ProposalMethod::Objectness:
      return rank_by_objectness(survivors);
    case ProposalMethod::ObjectLab: {
      auto out = objectlab_scores(survivors, gt);
      sort_proposals(out);
      return out;
    }
    case ProposalMethod::MetaDetect: {
      const auto correct = label_detections(survivors, gt, config.meta.iou_threshold);
      const auto cv = train_meta_cv(features, correct, config.meta);
      std::vector<Proposal> out;
      out.reserve(survivors.size());
      for (std::size_t i = 0; i < survivors.size(); ++i) {
        out.push_back({survivors[i].image_id, survivors[i].bbox, survivors[i].score,
                       cv.oof_error_probability[i], ScoreMethod::MetaDetect,
                       ProposalTarget::PredictionBox});
      }
      sort_proposals(out);
      return out;
    }
    case ProposalMethod::InstanceWiseLoss:
      break;
  }
  throw UnknownMethod("unhandled proposal method");
}

void write_proposals(std::ostream& out, std::span<const Proposal> proposals) {
  for (const auto& p : proposals) {
    const json record = {
        {"image_id", p.image_id},
        {"bbox", {p.bbox.left(), p.bbox.top(), p.bbox.right(), p.bbox.bottom()}},
        {"method", to_string(p.method)},
        {"target", to_string(p.target)},
        {"detector_score", p.detector_score},
        {"error_probability", p.error_probability},
    };
    out << record.dump() << '\n';
  }
}

std::vector<Proposal> read_proposals(std::istream& in) {
  std::vector<Proposal> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      const auto& b = r.at("bbox");
      out.push_back({r.at("image_id").get<std::string>(),
                     BBox(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                          b.at(3).get<double>()),
                     r.value("detector_score", 0.0), r.at("error_probability").get<double>(),
                     parse_score_method(r.at("method").get<std::string>()),
                     parse_proposal_target(r.at("target").get<std::string>())});
    } catch (const std::exception& e) {
      throw std::runtime_error("proposal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace recd
