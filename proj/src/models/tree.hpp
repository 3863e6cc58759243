#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dynrec::models {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const;
  std::size_t leaf_count() const;
  int depth() const;
};

struct TreeOptions {
  int max_depth = 0;        // 0 = unlimited
  double min_leaf = 1.0;    // minimum sample weight per child
  std::size_t mtry = 0;     // candidate features per node, 0 = all
};

/// Per-feature row orderings shared by every tree grown on the same design.
class PresortedDesign {
 public:
  explicit PresortedDesign(const Eigen::MatrixXd& x);

  const Eigen::MatrixXd& x() const { return *x_; }
  const std::vector<std::uint32_t>& order(Eigen::Index feature) const { return order_[std::size_t(feature)]; }

 private:
  const Eigen::MatrixXd* x_;
  std::vector<std::vector<std::uint32_t>> order_;
};

/// Grows a least-squares CART tree level by level. `weights` are per-row sample counts
/// (0 excludes a row). Split candidates are scanned by ascending feature index then
/// ascending threshold; only a strictly larger gain replaces the incumbent. Squared-error
/// reductions are added to `importance` per feature.
RegressionTree grow_tree(const PresortedDesign& design, const std::vector<double>& target,
                         const std::vector<double>& weights, const TreeOptions& options,
                         std::uint64_t seed, std::vector<double>& importance);

}  // namespace dynrec::models
