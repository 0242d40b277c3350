#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "nnreach/graph.hpp"

namespace nnreach {

/// Elementwise interval [lo, hi]; also used as an axis-aligned box.
struct IntervalBound {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
  Eigen::VectorXd width() const { return hi - lo; }
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }
  Eigen::VectorXd radius() const { return 0.5 * (hi - lo); }
  bool contains(const Eigen::VectorXd& z, double tol = 0.0) const;
  bool finite() const { return lo.allFinite() && hi.allFinite(); }
  /// Throws InvalidInterval unless lo <= hi elementwise.
  void validate() const;

  static IntervalBound point(const Eigen::VectorXd& z) { return {z, z}; }
  static IntervalBound of(std::initializer_list<double> lo, std::initializer_list<double> hi);
};

using Box = IntervalBound;

/// {z | normal . z >= offset}
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

/// Domain of a source node: a bounding box plus optional template halfspaces.
struct InputSet {
  Box box;
  std::vector<Halfspace> halfspaces;

  std::size_t dim() const { return box.dim(); }
  bool contains(const Eigen::VectorXd& z, double tol = 0.0) const;
};

/// Source domains keyed by node.
using InputSets = std::map<NodeId, InputSet>;

std::vector<NodeId> source_nodes(const InputSets& sets);

/// min a^T z over the box.
double box_min(const Box& box, const Eigen::VectorXd& a);

/// min a^T z over the set (box plus halfspaces); the box alone when there are
/// no halfspaces, otherwise a small LP.
double set_min(const InputSet& set, const Eigen::VectorXd& a);

/// Splits a full disturbance box across the disturbance input nodes of g.
InputSets make_input_sets(const CompGraph& g, const InputSet& state, const Box* disturbance);

}  // namespace nnreach
