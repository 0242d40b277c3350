#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nnreach/error.hpp"

namespace nnreach {

struct NodeId {
  std::size_t value = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class OpKind { Input, Affine, Relu, Tanh, Add, Concat };

const char* to_string(OpKind kind);

/// Operator attached to a graph node. `input_dims` lists the expected
/// dimension of each argument slot; its size is the arity.
struct Operator {
  OpKind kind = OpKind::Input;
  std::vector<std::size_t> input_dims;
  Eigen::MatrixXd weight;  // Affine only; columns follow the slot order
  Eigen::VectorXd bias;    // Affine only

  static Operator input();
  /// Single-argument affine map unless `input_dims` splits the columns.
  static Operator affine(Eigen::MatrixXd w, Eigen::VectorXd b,
                         std::vector<std::size_t> input_dims = {});
  static Operator relu(std::size_t dim);
  static Operator tanh(std::size_t dim);
  static Operator add(std::size_t dim, std::size_t arity);
  static Operator concat(std::vector<std::size_t> input_dims);

  std::size_t arity() const { return input_dims.size(); }
  bool is_activation() const { return kind == OpKind::Relu || kind == OpKind::Tanh; }
};

struct NodeDecl {
  NodeId id;
  Operator op;
  std::size_t dim = 0;
};

struct Edge {
  NodeId src;
  NodeId dst;
  std::size_t slot = 0;
};

/// Immutable, validated computational DAG. Node ids are dense in [0, size).
class CompGraph {
 public:
  CompGraph() = default;

  std::size_t size() const { return nodes_.size(); }
  const Operator& op(NodeId id) const { return nodes_.at(id.value).op; }
  std::size_t dim(NodeId id) const { return nodes_.at(id.value).dim; }
  /// Arguments of `id` in slot order (Pre(z_j)).
  std::span<const NodeId> pre(NodeId id) const { return nodes_.at(id.value).pre; }
  std::span<const NodeId> successors(NodeId id) const { return nodes_.at(id.value).succ; }
  const std::vector<NodeId>& input_nodes() const { return inputs_; }
  NodeId output_node() const { return output_; }
  const std::vector<NodeId>& topo_order() const { return topo_; }
  /// Position of `id` in topo_order().
  std::size_t topo_rank(NodeId id) const { return rank_.at(id.value); }
  bool is_input(NodeId id) const { return op(id).kind == OpKind::Input; }

  /// Total input dimension across the state and disturbance blocks.
  std::size_t state_dim() const;
  std::size_t disturbance_dim() const;

 private:
  friend CompGraph build_graph(std::vector<NodeDecl>, std::vector<Edge>, std::vector<NodeId>,
                               NodeId);

  struct Node {
    Operator op;
    std::size_t dim = 0;
    std::vector<NodeId> pre;
    std::vector<NodeId> succ;
  };

  std::vector<Node> nodes_;
  std::vector<NodeId> inputs_;
  NodeId output_;
  std::vector<NodeId> topo_;
  std::vector<std::size_t> rank_;
};

/// Validates and assembles a graph. Throws Error with CycleDetected,
/// ArityMismatch, DimensionMismatch, DanglingEdge or InvalidGraph.
CompGraph build_graph(std::vector<NodeDecl> nodes, std::vector<Edge> edges,
                      std::vector<NodeId> inputs, NodeId output);

/// Kahn's algorithm; ties broken by ascending id.
std::vector<NodeId> topological_order(const CompGraph& g);

/// Result of unrolling a one-step NNDS graph over T steps.
struct UnrolledGraph {
  CompGraph graph;
  /// states[t] is the node carrying x_t, t = 0..T.
  std::vector<NodeId> states;
  /// disturbances[t] are the input nodes holding w_t, t = 0..T-1.
  std::vector<std::vector<NodeId>> disturbances;
};

/// The first input node of `f` is the state x_t; any further inputs form the
/// disturbance w_t. Returns f^(T) with inputs (x_0, w_0, ..., w_{T-1}).
UnrolledGraph unroll(const CompGraph& f, std::size_t steps);

struct SubgraphSpec {
  std::vector<NodeId> input_nodes;   // stop nodes reached by the search
  NodeId output_node;
  std::vector<NodeId> member_nodes;  // ascending id
};

/// Breadth-first constraint extraction from `output` toward `stop_nodes`.
SubgraphSpec extract_subgraph(const CompGraph& g, std::span<const NodeId> stop_nodes,
                              NodeId output);

/// Forward pass; one value per input node, in input_nodes() order.
Eigen::VectorXd evaluate(const CompGraph& g, std::span<const Eigen::VectorXd> inputs);

/// Forward pass returning the value of every node, indexed by id.
std::vector<Eigen::VectorXd> evaluate_all(const CompGraph& g,
                                          std::span<const Eigen::VectorXd> inputs);

/// Applies a single operator to its argument values.
Eigen::VectorXd apply_operator(const Operator& op, std::span<const Eigen::VectorXd> args,
                               std::size_t out_dim);

}  // namespace nnreach

template <>
struct std::hash<nnreach::NodeId> {
  std::size_t operator()(const nnreach::NodeId& id) const noexcept {
    return std::hash<std::size_t>{}(id.value);
  }
};
