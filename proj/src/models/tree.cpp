#include "models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rng.hpp"

namespace dynrec::models {

double RegressionTree::predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
  int k = 0;
  while (nodes[std::size_t(k)].feature >= 0) {
    const auto& n = nodes[std::size_t(k)];
    k = x(row, n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[std::size_t(k)].value;
}

std::size_t RegressionTree::leaf_count() const {
  return std::size_t(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature >= 0) {
      d[std::size_t(nodes[k].left)] = d[k] + 1;
      d[std::size_t(nodes[k].right)] = d[k] + 1;
    }
    best = std::max(best, d[k]);
  }
  return best;
}

PresortedDesign::PresortedDesign(const Eigen::MatrixXd& x) : x_(&x) {
  order_.resize(std::size_t(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto& o = order_[std::size_t(j)];
    o.resize(std::size_t(x.rows()));
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
  }
}

namespace {

struct NodeState {
  int node = 0;  // index into tree.nodes
  double w = 0.0;
  double s = 0.0;
  double sq = 0.0;  // weighted sum of squares, only for the split gain floor
  int depth = 0;
  std::vector<char> candidate;  // per-feature mask when mtry < p
  // sweep state
  double wl = 0.0, sl = 0.0;
  double last = 0.0;
  bool seen = false;
  // best split
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

}  // namespace

RegressionTree grow_tree(const PresortedDesign& design, const std::vector<double>& target,
                         const std::vector<double>& weights, const TreeOptions& opt,
                         std::uint64_t seed, std::vector<double>& importance) {
  const Eigen::MatrixXd& x = design.x();
  const std::size_t n = std::size_t(x.rows());
  const std::size_t p = std::size_t(x.cols());
  const std::size_t mtry = (opt.mtry == 0 || opt.mtry > p) ? p : opt.mtry;
  Rng rng(seed);

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> slot(n, -1);  // row -> index into `active`, or -1
  std::vector<int> leaf_of(n, -1);

  std::vector<NodeState> active(1);
  active[0].node = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] <= 0.0) continue;
    slot[i] = 0;
    active[0].w += weights[i];
    active[0].s += weights[i] * target[i];
    active[0].sq += weights[i] * target[i] * target[i];
  }

  while (!active.empty()) {
    bool any_splittable = false;
    for (auto& a : active) {
      a.best_gain = 0.0;
      a.best_feature = -1;
      const bool depth_ok = opt.max_depth <= 0 || a.depth < opt.max_depth;
      if (!depth_ok || a.w < 2.0 * opt.min_leaf) {
        a.candidate.assign(p, 0);
        continue;
      }
      any_splittable = true;
      if (mtry == p) {
        a.candidate.assign(p, 1);
      } else {
        a.candidate.assign(p, 0);
        for (auto j : rng.sample_without_replacement(p, mtry)) a.candidate[j] = 1;
      }
    }

    if (any_splittable) {
      for (std::size_t j = 0; j < p; ++j) {
        bool needed = false;
        for (auto& a : active) {
          a.wl = a.sl = 0.0;
          a.seen = false;
          needed = needed || a.candidate[j];
        }
        if (!needed) continue;
        for (std::uint32_t i : design.order(Eigen::Index(j))) {
          const int k = slot[i];
          if (k < 0) continue;
          NodeState& a = active[std::size_t(k)];
          if (!a.candidate[j]) continue;
          const double v = x(i, Eigen::Index(j));
          if (a.seen && v > a.last && a.wl >= opt.min_leaf && a.w - a.wl >= opt.min_leaf) {
            const double wr = a.w - a.wl;
            const double sr = a.s - a.sl;
            const double gain = a.sl * a.sl / a.wl + sr * sr / wr - a.s * a.s / a.w;
            if (gain > a.best_gain) {
              double thr = 0.5 * (a.last + v);
              if (!(thr < v)) thr = a.last;
              a.best_gain = gain;
              a.best_feature = int(j);
              a.best_threshold = thr;
            }
          }
          a.wl += weights[i];
          a.sl += weights[i] * target[i];
          a.last = v;
          a.seen = true;
        }
      }
    }

    // Gains below this floor are rounding noise in the sum-of-squares identity.
    std::vector<NodeState> next;
    std::vector<int> remap(active.size(), -1);
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto& a = active[k];
      const double floor = 1e-12 * std::max(a.sq, std::numeric_limits<double>::min());
      if (a.best_feature < 0 || a.best_gain <= floor) continue;
      importance[std::size_t(a.best_feature)] += a.best_gain;
      const int left = int(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[std::size_t(a.node)];
      node.feature = a.best_feature;
      node.threshold = a.best_threshold;
      node.left = left;
      node.right = left + 1;
      remap[k] = int(next.size());
      for (int c = 0; c < 2; ++c) {
        NodeState child;
        child.node = left + c;
        child.depth = a.depth + 1;
        next.push_back(std::move(child));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int k = slot[i];
      if (k < 0) continue;
      const auto& a = active[std::size_t(k)];
      if (remap[std::size_t(k)] < 0) {
        leaf_of[i] = a.node;
        slot[i] = -1;
        continue;
      }
      const bool go_left = x(Eigen::Index(i), a.best_feature) <= a.best_threshold;
      const int c = remap[std::size_t(k)] + (go_left ? 0 : 1);
      slot[i] = c;
      auto& child = next[std::size_t(c)];
      child.w += weights[i];
      child.s += weights[i] * target[i];
      child.sq += weights[i] * target[i] * target[i];
    }
    active = std::move(next);
  }

  // Leaf means anchored at a member's target, exact when all members agree.
  std::vector<double> anchor(tree.nodes.size(), 0.0), acc(tree.nodes.size(), 0.0), wsum(tree.nodes.size(), 0.0);
  std::vector<char> has(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = leaf_of[i];
    if (l < 0) continue;
    const auto li = std::size_t(l);
    if (!has[li]) {
      has[li] = 1;
      anchor[li] = target[i];
    }
    acc[li] += weights[i] * (target[i] - anchor[li]);
    wsum[li] += weights[i];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k)
    if (tree.nodes[k].feature < 0 && has[k]) tree.nodes[k].value = anchor[k] + acc[k] / wsum[k];
  return tree;
}

}  // namespace dynrec::models
