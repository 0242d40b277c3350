#include "nnreach/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>
#include <queue>
#include <string>

namespace nnreach {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Affine: return "affine";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Add: return "add";
    case OpKind::Concat: return "concat";
  }
  return "?";
}

Operator Operator::input() { return Operator{}; }

Operator Operator::affine(Eigen::MatrixXd w, Eigen::VectorXd b,
                          std::vector<std::size_t> input_dims) {
  Operator op;
  op.kind = OpKind::Affine;
  if (input_dims.empty()) input_dims.push_back(static_cast<std::size_t>(w.cols()));
  op.input_dims = std::move(input_dims);
  op.weight = std::move(w);
  op.bias = std::move(b);
  return op;
}

Operator Operator::relu(std::size_t dim) {
  Operator op;
  op.kind = OpKind::Relu;
  op.input_dims = {dim};
  return op;
}

Operator Operator::tanh(std::size_t dim) {
  Operator op;
  op.kind = OpKind::Tanh;
  op.input_dims = {dim};
  return op;
}

Operator Operator::add(std::size_t dim, std::size_t arity) {
  Operator op;
  op.kind = OpKind::Add;
  op.input_dims.assign(arity, dim);
  return op;
}

Operator Operator::concat(std::vector<std::size_t> input_dims) {
  Operator op;
  op.kind = OpKind::Concat;
  op.input_dims = std::move(input_dims);
  return op;
}

std::size_t CompGraph::state_dim() const {
  return inputs_.empty() ? 0 : dim(inputs_.front());
}

std::size_t CompGraph::disturbance_dim() const {
  std::size_t n = 0;
  for (std::size_t i = 1; i < inputs_.size(); ++i) n += dim(inputs_[i]);
  return n;
}

namespace {

std::string node_name(NodeId id) { return "node " + std::to_string(id.value); }

void check_operator(NodeId id, const Operator& op, std::size_t dim) {
  auto fail = [&](const std::string& msg) { throw Error(Errc::DimensionMismatch, node_name(id) + ": " + msg); };
  const std::size_t total = std::accumulate(op.input_dims.begin(), op.input_dims.end(), std::size_t{0});
  switch (op.kind) {
    case OpKind::Input:
      if (op.arity() != 0) throw Error(Errc::ArityMismatch, node_name(id) + ": input with arguments");
      break;
    case OpKind::Affine:
      if (op.arity() == 0) throw Error(Errc::ArityMismatch, node_name(id) + ": affine without arguments");
      if (static_cast<std::size_t>(op.weight.cols()) != total) fail("weight columns != total input dim");
      if (static_cast<std::size_t>(op.weight.rows()) != dim) fail("weight rows != node dim");
      if (static_cast<std::size_t>(op.bias.size()) != dim) fail("bias size != node dim");
      break;
    case OpKind::Relu:
    case OpKind::Tanh:
      if (op.arity() != 1) throw Error(Errc::ArityMismatch, node_name(id) + ": activation takes one argument");
      if (op.input_dims[0] != dim) fail("activation must preserve dimension");
      break;
    case OpKind::Add:
      if (op.arity() < 2) throw Error(Errc::ArityMismatch, node_name(id) + ": add needs two or more arguments");
      for (auto d : op.input_dims)
        if (d != dim) fail("add arguments must match the node dim");
      break;
    case OpKind::Concat:
      if (op.arity() == 0) throw Error(Errc::ArityMismatch, node_name(id) + ": concat without arguments");
      if (total != dim) fail("concat dim != sum of argument dims");
      break;
  }
  if (dim == 0) fail("zero dimension");
}

}  // namespace

CompGraph build_graph(std::vector<NodeDecl> nodes, std::vector<Edge> edges,
                      std::vector<NodeId> inputs, NodeId output) {
  if (nodes.empty()) throw Error(Errc::InvalidGraph, "empty node list");
  std::sort(nodes.begin(), nodes.end(), [](const NodeDecl& a, const NodeDecl& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i].id == nodes[i - 1].id)
      throw Error(Errc::InvalidGraph, "duplicate " + node_name(nodes[i].id));
    if (nodes[i].id.value != i) throw Error(Errc::InvalidGraph, "node ids must be dense from 0");
  }

  CompGraph g;
  g.nodes_.resize(nodes.size());
  for (auto& decl : nodes) {
    check_operator(decl.id, decl.op, decl.dim);
    g.nodes_[decl.id.value].op = std::move(decl.op);
    g.nodes_[decl.id.value].dim = decl.dim;
  }

  // Slot bookkeeping: every argument slot filled exactly once.
  std::vector<std::vector<std::optional<NodeId>>> slots(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) slots[i].resize(g.nodes_[i].op.arity());
  for (const auto& e : edges) {
    if (e.src.value >= g.nodes_.size() || e.dst.value >= g.nodes_.size())
      throw Error(Errc::DanglingEdge, "edge " + std::to_string(e.src.value) + "->" + std::to_string(e.dst.value));
    auto& s = slots[e.dst.value];
    if (e.slot >= s.size() || s[e.slot].has_value())
      throw Error(Errc::ArityMismatch, node_name(e.dst) + ": bad or repeated slot " + std::to_string(e.slot));
    s[e.slot] = e.src;
  }
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    for (std::size_t k = 0; k < slots[i].size(); ++k) {
      if (!slots[i][k]) throw Error(Errc::ArityMismatch, node_name(NodeId{i}) + ": slot " + std::to_string(k) + " unfilled");
      const NodeId src = *slots[i][k];
      if (g.nodes_[src.value].dim != g.nodes_[i].op.input_dims[k])
        throw Error(Errc::DimensionMismatch, node_name(NodeId{i}) + ": slot " + std::to_string(k) + " dim mismatch");
      g.nodes_[i].pre.push_back(src);
      g.nodes_[src.value].succ.push_back(NodeId{i});
    }
  }
  for (auto& n : g.nodes_) {
    std::sort(n.succ.begin(), n.succ.end());
    n.succ.erase(std::unique(n.succ.begin(), n.succ.end()), n.succ.end());
  }

  // Inputs: exactly the Input-kind nodes, each listed once.
  std::vector<NodeId> sorted_inputs = inputs;
  std::sort(sorted_inputs.begin(), sorted_inputs.end());
  if (std::adjacent_find(sorted_inputs.begin(), sorted_inputs.end()) != sorted_inputs.end())
    throw Error(Errc::InvalidGraph, "repeated input node");
  for (auto id : inputs) {
    if (id.value >= g.nodes_.size()) throw Error(Errc::DanglingEdge, "unknown input " + node_name(id));
    if (g.nodes_[id.value].op.kind != OpKind::Input)
      throw Error(Errc::InvalidGraph, node_name(id) + " listed as input but has an operator");
  }
  for (std::size_t i = 0; i < g.nodes_.size(); ++i)
    if (g.nodes_[i].op.kind == OpKind::Input &&
        !std::binary_search(sorted_inputs.begin(), sorted_inputs.end(), NodeId{i}))
      throw Error(Errc::InvalidGraph, node_name(NodeId{i}) + " is an input node missing from the input list");
  if (inputs.empty()) throw Error(Errc::InvalidGraph, "no input nodes");
  if (output.value >= g.nodes_.size()) throw Error(Errc::DanglingEdge, "unknown output " + node_name(output));
  g.inputs_ = std::move(inputs);
  g.output_ = output;

  // Kahn with a min-heap on ids.
  std::vector<std::size_t> indeg(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) indeg[i] = g.nodes_[i].pre.size();
  // Multi-edges from the same source count once per slot, so decrement per slot.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < indeg.size(); ++i)
    if (indeg[i] == 0) ready.push(i);
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    g.topo_.push_back(NodeId{i});
    for (auto s : g.nodes_[i].succ) {
      const auto& pre = g.nodes_[s.value].pre;
      const auto uses = static_cast<std::size_t>(std::count(pre.begin(), pre.end(), NodeId{i}));
      indeg[s.value] -= uses;
      if (indeg[s.value] == 0) ready.push(s.value);
    }
  }
  if (g.topo_.size() != g.nodes_.size()) throw Error(Errc::CycleDetected, "graph contains a cycle");
  g.rank_.resize(g.nodes_.size());
  for (std::size_t r = 0; r < g.topo_.size(); ++r) g.rank_[g.topo_[r].value] = r;

  // The output must depend on at least one input.
  if (g.nodes_[output.value].op.kind != OpKind::Input) {
    std::vector<bool> seen(g.nodes_.size(), false);
    std::deque<NodeId> q{output};
    seen[output.value] = true;
    bool hit = false;
    while (!q.empty() && !hit) {
      const NodeId n = q.front();
      q.pop_front();
      for (auto p : g.nodes_[n.value].pre) {
        if (g.nodes_[p.value].op.kind == OpKind::Input) hit = true;
        if (!seen[p.value]) {
          seen[p.value] = true;
          q.push_back(p);
        }
      }
    }
    if (!hit) throw Error(Errc::InvalidGraph, "output does not depend on any input");
  }
  return g;
}

std::vector<NodeId> topological_order(const CompGraph& g) { return g.topo_order(); }

UnrolledGraph unroll(const CompGraph& f, std::size_t steps) {
  if (steps == 0) throw Error(Errc::InvalidArgument, "unroll needs at least one step");
  const NodeId state_in = f.input_nodes().front();
  if (f.dim(f.output_node()) != f.dim(state_in))
    throw Error(Errc::StateDimMismatch, "output dim " + std::to_string(f.dim(f.output_node())) +
                                            " != state dim " + std::to_string(f.dim(state_in)));

  std::vector<NodeDecl> decls;
  std::vector<Edge> edges;
  std::vector<NodeId> inputs;
  UnrolledGraph out;

  std::vector<NodeId> map(f.size());
  NodeId prev_output{};
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<NodeId> step_dist;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const NodeId id{i};
      if (t > 0 && id == state_in) {
        map[i] = prev_output;
        continue;
      }
      map[i] = NodeId{decls.size()};
      decls.push_back(NodeDecl{map[i], f.op(id), f.dim(id)});
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      const NodeId id{i};
      if (t > 0 && id == state_in) continue;
      const auto pre = f.pre(id);
      for (std::size_t k = 0; k < pre.size(); ++k) edges.push_back(Edge{map[pre[k].value], map[i], k});
    }
    if (t == 0) {
      inputs.push_back(map[state_in.value]);
      out.states.push_back(map[state_in.value]);
    }
    for (std::size_t k = 1; k < f.input_nodes().size(); ++k) {
      const NodeId w = map[f.input_nodes()[k].value];
      inputs.push_back(w);
      step_dist.push_back(w);
    }
    out.disturbances.push_back(std::move(step_dist));
    prev_output = map[f.output_node().value];
    out.states.push_back(prev_output);
  }
  out.graph = build_graph(std::move(decls), std::move(edges), std::move(inputs), prev_output);
  return out;
}

SubgraphSpec extract_subgraph(const CompGraph& g, std::span<const NodeId> stop_nodes, NodeId output) {
  if (output.value >= g.size()) throw Error(Errc::DanglingEdge, "unknown output " + node_name(output));
  std::vector<bool> is_stop(g.size(), false);
  for (auto s : stop_nodes) {
    if (s.value >= g.size()) throw Error(Errc::DanglingEdge, "unknown input " + node_name(s));
    is_stop[s.value] = true;
  }
  SubgraphSpec spec;
  spec.output_node = output;
  if (is_stop[output.value]) {
    spec.input_nodes.push_back(output);
    return spec;
  }

  std::vector<bool> explored(g.size(), false);
  std::vector<bool> reached_stop(g.size(), false);
  std::deque<NodeId> queue;
  queue.push_back(output);
  explored[output.value] = true;
  while (!queue.empty()) {
    const NodeId zi = queue.front();
    queue.pop_front();
    spec.member_nodes.push_back(zi);
    for (auto zj : g.pre(zi)) {
      if (is_stop[zj.value]) {
        reached_stop[zj.value] = true;
      } else if (!explored[zj.value]) {
        queue.push_back(zj);
        explored[zj.value] = true;
      }
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    if (reached_stop[i]) spec.input_nodes.push_back(NodeId{i});
  if (spec.input_nodes.empty())
    throw Error(Errc::UnreachableOutput, node_name(output) + " is not connected to the given inputs");
  std::sort(spec.member_nodes.begin(), spec.member_nodes.end());
  return spec;
}

Eigen::VectorXd apply_operator(const Operator& op, std::span<const Eigen::VectorXd> args,
                               std::size_t out_dim) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(out_dim));
  switch (op.kind) {
    case OpKind::Input:
      throw Error(Errc::InvalidArgument, "input nodes have no operator");
    case OpKind::Affine: {
      // Fixed summation order: ascending input index across the slots.
      for (Eigen::Index r = 0; r < y.size(); ++r) {
        double acc = 0.0;
        Eigen::Index col = 0;
        for (const auto& a : args)
          for (Eigen::Index k = 0; k < a.size(); ++k) acc += op.weight(r, col++) * a[k];
        y[r] = acc + op.bias[r];
      }
      break;
    }
    case OpKind::Relu:
      for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = args[0][i] > 0.0 ? args[0][i] : 0.0;
      break;
    case OpKind::Tanh:
      for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::tanh(args[0][i]);
      break;
    case OpKind::Add:
      y = args[0];
      for (std::size_t k = 1; k < args.size(); ++k) y += args[k];
      break;
    case OpKind::Concat: {
      Eigen::Index off = 0;
      for (const auto& a : args) {
        y.segment(off, a.size()) = a;
        off += a.size();
      }
      break;
    }
  }
  return y;
}

std::vector<Eigen::VectorXd> evaluate_all(const CompGraph& g, std::span<const Eigen::VectorXd> inputs) {
  if (inputs.size() != g.input_nodes().size())
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(g.input_nodes().size()) + " input values");
  std::vector<Eigen::VectorXd> val(g.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const NodeId id = g.input_nodes()[k];
    if (static_cast<std::size_t>(inputs[k].size()) != g.dim(id))
      throw Error(Errc::DimensionMismatch, "value for " + node_name(id) + " has wrong size");
    val[id.value] = inputs[k];
  }
  std::vector<Eigen::VectorXd> args;
  for (auto id : g.topo_order()) {
    if (g.is_input(id)) continue;
    args.clear();
    for (auto p : g.pre(id)) args.push_back(val[p.value]);
    val[id.value] = apply_operator(g.op(id), args, g.dim(id));
  }
  return val;
}

Eigen::VectorXd evaluate(const CompGraph& g, std::span<const Eigen::VectorXd> inputs) {
  auto all = evaluate_all(g, inputs);
  return all[g.output_node().value];
}

}  // namespace nnreach
