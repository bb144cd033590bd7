#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace recd::ml {

/// Row-major dense feature matrix.
using Rows = std::vector<std::vector<double>>;

struct GbdtParams {
  int rounds = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double l2 = 1.0;
  double min_gain = 1e-9;
};

/// Gradient-boosted regression trees on the logistic loss, using Newton leaf
/// values and exact level-wise split search over presorted features.
class GradientBoostedTrees {
 public:
  explicit GradientBoostedTrees(GbdtParams params = {}) : params_(params) {}

  void fit(const Rows& x, std::span<const int> y);
  double predict_margin(std::span<const double> row) const;
  double predict_proba(std::span<const double> row) const;

  std::size_t tree_count() const noexcept { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  Tree grow_tree(const Rows& x, std::span<const double> grad, std::span<const double> hess,
                 const std::vector<std::vector<std::size_t>>& sorted) const;
  static double eval_tree(const Tree& tree, std::span<const double> row);

  GbdtParams params_;
  double base_margin_ = 0.0;
  std::vector<Tree> trees_;
};

struct LogisticParams {
  int iterations = 2000;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

/// L2-regularized logistic regression fitted by full-batch gradient descent.
/// Expects roughly standardized features.
class LogisticRegression {
 public:
  explicit LogisticRegression(LogisticParams params = {}) : params_(params) {}

  void fit(const Rows& x, std::span<const int> y);
  double predict_proba(std::span<const double> row) const;

  std::span<const double> weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

 private:
  LogisticParams params_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

double sigmoid(double margin) noexcept;

/// Area under the ROC curve via average ranks (Mann-Whitney U); ties count 1/2.
/// `labels` are 1 for positives, 0 for negatives.
double auroc(std::span<const double> scores, std::span<const int> labels);

}  // namespace recd::ml
