#include "recd/softlabel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recd/microtask.hpp"

namespace recd {

namespace {

bool contains(const std::vector<std::string>& set, const std::string& token) {
  return std::find(set.begin(), set.end(), token) != set.end();
}

std::string prefixed(const std::string& prefix, const std::string& option) {
  return prefix + ":" + option;
}

ResponseCounts strip_prefix(const ResponseCounts& counts, const std::string& prefix) {
  ResponseCounts out;
  const std::string head = prefix + ":";
  for (const auto& [key, n] : counts) {
    if (key.compare(0, head.size(), head) == 0) out[key.substr(head.size())] += n;
  }
  return out;
}

void add_prefixed(ResponseCounts& into, const ResponseCounts& from, const std::string& prefix) {
  for (const auto& [key, n] : from) into[prefixed(prefix, key)] += n;
}

double binomial_variance(const SoftLabel& l) {
  return l.p_hat * (1.0 - l.p_hat) / static_cast<double>(l.n_valid);
}

}  // namespace

BinaryQuestion is_pedestrian_question() {
  return {"is_pedestrian", {std::string(options::kYes)}, {std::string(options::kCantSolve)}};
}

BinaryQuestion is_human_question() {
  return {"is_human", {std::string(options::kYes)}, {std::string(options::kCantSolve)}};
}

BinaryQuestion walking_question() {
  return {"activity", {std::string(options::kWalking)}, {std::string(options::kCantSolve)}};
}

int SoftLabel::n_responses() const noexcept {
  int total = 0;
  for (const auto& [key, n] : counts) total += n;
  return total;
}

Interval wilson_interval(int k, int n, double z) {
  if (n <= 0) throw std::invalid_argument("wilson_interval: n must be >= 1");
  if (k < 0 || k > n) throw std::invalid_argument("wilson_interval: k must lie in [0, n]");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  Interval ci{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
  if (k == 0) ci.low = 0.0;
  if (k == n) ci.high = 1.0;
  // Rounding can push a bound a hair past p_hat near the boundaries.
  ci.low = std::min(ci.low, p);
  ci.high = std::max(ci.high, p);
  return ci;
}

SoftLabel label_from_counts(const ResponseCounts& counts, const BinaryQuestion& question,
                            double z) {
  SoftLabel label;
  label.counts = counts;
  label.z = z;
  for (const auto& [option, n] : counts) {
    if (n < 0) throw std::invalid_argument("negative response count for " + option);
    if (contains(question.invalid, option)) continue;
    label.n_valid += n;
    if (contains(question.positive, option)) label.positives += n;
  }
  if (label.n_valid == 0) {
    label.resolvable = false;
    return label;
  }
  label.resolvable = true;
  label.p_hat = static_cast<double>(label.positives) / label.n_valid;
  const Interval ci = wilson_interval(label.positives, label.n_valid, z);
  label.ci_low = ci.low;
  label.ci_high = ci.high;
  return label;
}

SoftLabel aggregate_binary(std::span<const std::string> answers, const BinaryQuestion& question,
                           double z) {
  if (answers.empty()) throw std::invalid_argument("aggregate_binary: no responses");
  ResponseCounts counts;
  for (const auto& a : answers) ++counts[a];
  return label_from_counts(counts, question, z);
}

SoftLabel product_soft_label(const SoftLabel& human, const SoftLabel& activity,
                             const std::string& human_name, const std::string& activity_name,
                             double z) {
  SoftLabel out;
  out.composite = true;
  out.z = z;
  out.refined = human.refined || activity.refined;
  add_prefixed(out.counts, human.counts, human_name);
  add_prefixed(out.counts, activity.counts, activity_name);
  out.n_valid = human.n_valid + activity.n_valid;
  if (!human.resolvable || !activity.resolvable) {
    out.resolvable = false;
    return out;
  }
  out.resolvable = true;
  out.p_hat = human.p_hat * activity.p_hat;
  const double var = activity.p_hat * activity.p_hat * binomial_variance(human) +
                     human.p_hat * human.p_hat * binomial_variance(activity);
  const double half = z * std::sqrt(var);
  out.ci_low = std::clamp(out.p_hat - half, 0.0, 1.0);
  out.ci_high = std::clamp(out.p_hat + half, 0.0, 1.0);
  return out;
}

bool needs_refinement(const SoftLabel& label, const AmbiguityBand& band) noexcept {
  return label.resolvable && !label.refined && label.p_hat >= band.low &&
         label.p_hat <= band.high;
}

SoftLabel merge_refinement(const SoftLabel& base, std::span<const std::string> extra,
                           const BinaryQuestion& question) {
  ResponseCounts pooled = base.counts;
  for (const auto& a : extra) ++pooled[a];
  SoftLabel merged = label_from_counts(pooled, question, base.z);
  merged.refined = true;
  return merged;
}

LabelRecipe LabelRecipe::single(BinaryQuestion q, double z) {
  return {{std::move(q)}, z};
}

LabelRecipe LabelRecipe::pedestrian_product(double z) {
  return {{is_human_question(), walking_question()}, z};
}

SoftLabel evaluate_recipe(const ResponseCounts& counts, const LabelRecipe& recipe,
                          bool refined) {
  SoftLabel label;
  if (recipe.factors.size() == 1) {
    label = label_from_counts(counts, recipe.factors[0], recipe.z);
  } else if (recipe.factors.size() == 2) {
    const auto& hq = recipe.factors[0];
    const auto& aq = recipe.factors[1];
    const SoftLabel h = label_from_counts(strip_prefix(counts, hq.name), hq, recipe.z);
    const SoftLabel a = label_from_counts(strip_prefix(counts, aq.name), aq, recipe.z);
    label = product_soft_label(h, a, hq.name, aq.name, recipe.z);
  } else {
    throw std::invalid_argument("label recipe needs one or two factors");
  }
  label.refined = refined;
  return label;
}

ResponseCounts pool_counts(const ResponseCounts& a, const ResponseCounts& b) {
  ResponseCounts out = a;
  for (const auto& [key, n] : b) out[key] += n;
  return out;
}

SoftLabeledObject aggregate_duplicate_group(std::span<const SoftLabeledObject> members,
                                            const LabelRecipe& recipe) {
  if (members.empty()) throw std::invalid_argument("duplicate group has no members");
  if (members.size() == 1) return members.front();

  std::size_t rep = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const auto& cand = members[i];
    const auto& best = members[rep];
    if (cand.group_id != members.front().group_id) {
      throw std::invalid_argument("duplicate group members disagree on group_id");
    }
    if (cand.multiplicity > best.multiplicity ||
        (cand.multiplicity == best.multiplicity && cand.bbox.area() > best.bbox.area())) {
      rep = i;
    }
  }

  SoftLabeledObject out = members[rep];
  ResponseCounts pooled;
  bool refined = false;
  out.tasks.clear();
  out.members.clear();
  for (const auto& m : members) {
    pooled = pool_counts(pooled, m.label.counts);
    refined = refined || m.label.refined;
    out.tasks.insert(out.tasks.end(), m.tasks.begin(), m.tasks.end());
    if (m.members.empty()) {
      out.members.push_back(m.image_id + "/" + to_string(m.bbox));
    } else {
      out.members.insert(out.members.end(), m.members.begin(), m.members.end());
    }
  }
  out.label = evaluate_recipe(pooled, recipe, refined);
  return out;
}

}  // namespace recd
