#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace calreif {

// Static kd-tree over points referenced from an external row-major buffer.
// Queries are deterministic: exact ties resolve to the lower point index and
// radius results come back sorted.
class KdTree {
 public:
  KdTree() = default;

  // data: count x dim doubles, row-major. The buffer must outlive the tree.
  void build(const double* data, std::size_t count, int dim) {
    data_ = data;
    dim_ = dim;
    idx_.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx_[i] = static_cast<int>(i);
    nodes_.clear();
    nodes_.reserve(count / kLeafSize * 2 + 2);
    if (count > 0) root_ = build_range(0, count);
  }

  bool empty() const { return idx_.empty(); }
  std::size_t size() const { return idx_.size(); }

  struct Hit {
    int index = -1;
    double dist2 = std::numeric_limits<double>::infinity();
  };

  Hit nearest(const double* q) const { return nearest_impl(q, -1); }
  Hit nearest_excluding(const double* q, int excluded) const {
    return nearest_impl(q, excluded);
  }

  // Indices of points within distance r of q, ascending.
  std::vector<int> radius(const double* q, double r) const {
    std::vector<int> out;
    if (root_ >= 0) radius_node(root_, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t lo = 0, hi = 0;  // leaf range into idx_
  };

  const double* point(int i) const {
    return data_ + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_);
  }

  double dist2(const double* a, const double* b) const {
    double s = 0.0;
    for (int d = 0; d < dim_; ++d) {
      const double t = a[d] - b[d];
      s += t * t;
    }
    return s;
  }

  int build_range(std::size_t lo, std::size_t hi) {
    Node node;
    if (hi - lo <= kLeafSize) {
      node.lo = lo;
      node.hi = hi;
      std::sort(idx_.begin() + static_cast<std::ptrdiff_t>(lo),
                idx_.begin() + static_cast<std::ptrdiff_t>(hi));
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    // Split along the widest extent.
    int axis = 0;
    double best_spread = -1.0;
    for (int d = 0; d < dim_; ++d) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t i = lo; i < hi; ++i) {
        const double v = point(idx_[i])[d];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (mx - mn > best_spread) {
        best_spread = mx - mn;
        axis = d;
      }
    }
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(lo),
                     idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [this, axis](int a, int b) {
                       const double va = point(a)[axis], vb = point(b)[axis];
                       return va < vb || (va == vb && a < b);
                     });
    node.axis = axis;
    node.split = point(idx_[mid])[axis];
    nodes_.push_back(node);
    const int self = static_cast<int>(nodes_.size()) - 1;
    const int l = build_range(lo, mid);
    const int r = build_range(mid, hi);
    nodes_[static_cast<std::size_t>(self)].left = l;
    nodes_[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  Hit nearest_impl(const double* q, int excluded) const {
    Hit best;
    if (root_ >= 0) nearest_node(root_, q, excluded, best);
    return best;
  }

  void nearest_node(int ni, const double* q, int excluded, Hit& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
      for (std::size_t i = node.lo; i < node.hi; ++i) {
        const int pi = idx_[i];
        if (pi == excluded) continue;
        const double d2 = dist2(q, point(pi));
        if (d2 < best.dist2 || (d2 == best.dist2 && pi < best.index)) {
          best.dist2 = d2;
          best.index = pi;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff <= 0 ? node.left : node.right;
    const int far = diff <= 0 ? node.right : node.left;
    nearest_node(near, q, excluded, best);
    if (diff * diff <= best.dist2) nearest_node(far, q, excluded, best);
  }

  void radius_node(int ni, const double* q, double r2, std::vector<int>& out) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
      for (std::size_t i = node.lo; i < node.hi; ++i) {
        const int pi = idx_[i];
        if (dist2(q, point(pi)) <= r2) out.push_back(pi);
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff <= 0 ? node.left : node.right;
    const int far = diff <= 0 ? node.right : node.left;
    radius_node(near, q, r2, out);
    if (diff * diff <= r2) radius_node(far, q, r2, out);
  }

  const double* data_ = nullptr;
  int dim_ = 0;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace calreif
