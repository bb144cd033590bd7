#include "recd/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace recd::ml {

double sigmoid(double margin) noexcept {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

namespace {

void check_shape(const Rows& x, std::span<const int> y) {
  if (x.empty()) throw std::invalid_argument("empty training set");
  if (x.size() != y.size()) throw std::invalid_argument("feature/label size mismatch");
  const auto dim = x.front().size();
  for (const auto& r : x) {
    if (r.size() != dim) throw std::invalid_argument("ragged feature matrix");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
}

}  // namespace

void GradientBoostedTrees::fit(const Rows& x, std::span<const int> y) {
  check_shape(x, y);
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();

  const double pos = std::accumulate(y.begin(), y.end(), 0.0);
  const double mean = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  base_margin_ = std::log(mean / (1.0 - mean));
  trees_.clear();

  std::vector<std::vector<std::size_t>> sorted(dim, std::vector<std::size_t>(n));
  for (std::size_t f = 0; f < dim; ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
  }

  std::vector<double> margin(n, base_margin_);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  for (int round = 0; round < params_.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    Tree tree = grow_tree(x, grad, hess, sorted);
    for (std::size_t i = 0; i < n; ++i) margin[i] += eval_tree(tree, x[i]);
    trees_.push_back(std::move(tree));
  }
}

GradientBoostedTrees::Tree GradientBoostedTrees::grow_tree(
    const Rows& x, std::span<const double> grad, std::span<const double> hess,
    const std::vector<std::vector<std::size_t>>& sorted) const {
  const std::size_t n = x.size();
  const double lambda = params_.l2;
  const auto score = [lambda](double g, double h) { return g * g / (h + lambda); };

  Tree tree(1);
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};

  struct Totals {
    double g = 0.0;
    double h = 0.0;
    std::size_t count = 0;
  };
  struct Best {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
  };
  struct Scan {
    double g = 0.0;
    double h = 0.0;
    std::size_t count = 0;
    double last = 0.0;
  };

  for (int depth = 0; depth <= params_.max_depth && !frontier.empty(); ++depth) {
    std::vector<Totals> totals(tree.size());
    for (std::size_t i = 0; i < n; ++i) {
      auto& t = totals[static_cast<std::size_t>(node_of[i])];
      t.g += grad[i];
      t.h += hess[i];
      ++t.count;
    }
    std::vector<bool> active(tree.size(), false);
    for (int id : frontier) active[static_cast<std::size_t>(id)] = true;

    std::vector<Best> best(tree.size());
    if (depth < params_.max_depth) {
      const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
      for (std::size_t f = 0; f < sorted.size(); ++f) {
        std::vector<Scan> scan(tree.size());
        for (std::size_t i : sorted[f]) {
          const auto node = static_cast<std::size_t>(node_of[i]);
          if (!active[node]) continue;
          auto& s = scan[node];
          const double v = x[i][f];
          if (s.count >= min_leaf && v > s.last && totals[node].count - s.count >= min_leaf) {
            const auto& t = totals[node];
            const double gain =
                score(s.g, s.h) + score(t.g - s.g, t.h - s.h) - score(t.g, t.h);
            if (gain > best[node].gain) {
              best[node] = {gain, static_cast<int>(f), 0.5 * (s.last + v)};
            }
          }
          s.g += grad[i];
          s.h += hess[i];
          ++s.count;
          s.last = v;
        }
      }
    }

    std::vector<int> next;
    for (int id : frontier) {
      const auto node = static_cast<std::size_t>(id);
      if (best[node].feature >= 0 && best[node].gain > params_.min_gain) {
        tree[node].feature = best[node].feature;
        tree[node].threshold = best[node].threshold;
        tree[node].left = static_cast<int>(tree.size());
        tree[node].right = static_cast<int>(tree.size() + 1);
        tree.emplace_back();
        tree.emplace_back();
        next.push_back(tree[node].left);
        next.push_back(tree[node].right);
      } else {
        const auto& t = totals[node];
        tree[node].value = -params_.learning_rate * t.g / (t.h + lambda);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nd = tree[static_cast<std::size_t>(node_of[i])];
      if (nd.feature >= 0) {
        node_of[i] = x[i][static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                                : nd.right;
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

double GradientBoostedTrees::eval_tree(const Tree& tree, std::span<const double> row) {
  std::size_t id = 0;
  while (tree[id].feature >= 0) {
    const auto& nd = tree[id];
    id = static_cast<std::size_t>(row[static_cast<std::size_t>(nd.feature)] <= nd.threshold
                                      ? nd.left
                                      : nd.right);
  }
  return tree[id].value;
}

double GradientBoostedTrees::predict_margin(std::span<const double> row) const {
  double m = base_margin_;
  for (const auto& t : trees_) m += eval_tree(t, row);
  return m;
}

double GradientBoostedTrees::predict_proba(std::span<const double> row) const {
  return sigmoid(predict_margin(row));
}

void LogisticRegression::fit(const Rows& x, std::span<const int> y) {
  check_shape(x, y);
  const std::size_t n = x.size();
  const std::size_t dim = x.front().size();
  weights_.assign(dim, 0.0);
  bias_ = 0.0;
  std::vector<double> gw(dim);
  for (int it = 0; it < params_.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = predict_proba(x[i]) - y[i];
      for (std::size_t f = 0; f < dim; ++f) gw[f] += err * x[i][f];
      gb += err;
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t f = 0; f < dim; ++f) {
      weights_[f] -= params_.learning_rate * (gw[f] * inv + params_.l2 * weights_[f]);
    }
    bias_ -= params_.learning_rate * gb * inv;
  }
}

double LogisticRegression::predict_proba(std::span<const double> row) const {
  double m = bias_;
  for (std::size_t f = 0; f < weights_.size(); ++f) m += weights_[f] * row[f];
  return sigmoid(m);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("auroc needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace recd::ml
