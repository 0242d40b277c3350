#include "nnreach/network_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace nnreach {

using nlohmann::json;

namespace {

OpKind parse_kind(const std::string& s) {
  if (s == "input") return OpKind::Input;
  if (s == "affine") return OpKind::Affine;
  if (s == "relu") return OpKind::Relu;
  if (s == "tanh") return OpKind::Tanh;
  if (s == "add") return OpKind::Add;
  if (s == "concat") return OpKind::Concat;
  throw Error(Errc::ParseError, "unknown op '" + s + "'");
}

Eigen::MatrixXd parse_matrix(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw Error(Errc::ParseError, "W must be a nonempty array of rows");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != c) throw Error(Errc::ParseError, "ragged W");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  return out;
}

}  // namespace

CompGraph network_from_json(const json& doc) {
  try {
    const auto& nodes = doc.at("nodes");
    std::map<std::size_t, std::size_t> dims;
    for (const auto& n : nodes) dims[n.at("id").get<std::size_t>()] = n.at("dim").get<std::size_t>();

    std::vector<NodeDecl> decls;
    std::vector<Edge> edges;
    for (const auto& n : nodes) {
      const NodeId id{n.at("id").get<std::size_t>()};
      const OpKind kind = parse_kind(n.at("op").get<std::string>());
      const std::size_t dim = n.at("dim").get<std::size_t>();
      std::vector<NodeId> args;
      if (n.contains("inputs"))
        for (const auto& a : n.at("inputs")) args.push_back(NodeId{a.get<std::size_t>()});
      std::vector<std::size_t> arg_dims;
      for (auto a : args) {
        auto it = dims.find(a.value);
        if (it == dims.end()) throw Error(Errc::DanglingEdge, "node " + std::to_string(id.value) + " references unknown node");
        arg_dims.push_back(it->second);
      }
      Operator op;
      switch (kind) {
        case OpKind::Input: op = Operator::input(); break;
        case OpKind::Affine: {
          Eigen::MatrixXd w = parse_matrix(n.at("W"));
          Eigen::VectorXd b = n.contains("b") ? parse_vector(n.at("b")) : Eigen::VectorXd::Zero(w.rows());
          op = Operator::affine(std::move(w), std::move(b), arg_dims);
          break;
        }
        case OpKind::Relu: op = Operator::relu(arg_dims.empty() ? dim : arg_dims[0]); break;
        case OpKind::Tanh: op = Operator::tanh(arg_dims.empty() ? dim : arg_dims[0]); break;
        case OpKind::Add: op = Operator::add(dim, args.size()); op.input_dims = arg_dims; break;
        case OpKind::Concat: op = Operator::concat(arg_dims); break;
      }
      if (kind != OpKind::Input && kind != OpKind::Affine && args.size() != op.arity())
        throw Error(Errc::ArityMismatch, "node " + std::to_string(id.value));
      if (kind == OpKind::Affine && args.empty())
        throw Error(Errc::ArityMismatch, "affine node " + std::to_string(id.value) + " without inputs");
      for (std::size_t k = 0; k < args.size(); ++k) edges.push_back(Edge{args[k], id, k});
      decls.push_back(NodeDecl{id, std::move(op), dim});
    }
    std::vector<NodeId> inputs;
    for (const auto& i : doc.at("inputs")) inputs.push_back(NodeId{i.get<std::size_t>()});
    const NodeId output{doc.at("output").get<std::size_t>()};
    CompGraph g = build_graph(std::move(decls), std::move(edges), std::move(inputs), output);
    if (doc.contains("state_dim") && doc.at("state_dim").get<std::size_t>() != g.state_dim())
      throw Error(Errc::StateDimMismatch, "state_dim does not match the first input node");
    if (doc.contains("disturbance_dim") && doc.at("disturbance_dim").get<std::size_t>() != g.disturbance_dim())
      throw Error(Errc::StateDimMismatch, "disturbance_dim does not match the remaining input nodes");
    return g;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

json network_to_json(const CompGraph& g) {
  json doc;
  doc["inputs"] = json::array();
  for (auto id : g.input_nodes()) doc["inputs"].push_back(id.value);
  doc["output"] = g.output_node().value;
  doc["state_dim"] = g.state_dim();
  doc["disturbance_dim"] = g.disturbance_dim();
  json nodes = json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const NodeId id{i};
    json n;
    n["id"] = i;
    n["op"] = to_string(g.op(id).kind);
    n["dim"] = g.dim(id);
    json args = json::array();
    for (auto p : g.pre(id)) args.push_back(p.value);
    n["inputs"] = args;
    if (g.op(id).kind == OpKind::Affine) {
      const auto& w = g.op(id).weight;
      json rows = json::array();
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
        rows.push_back(std::move(row));
      }
      n["W"] = std::move(rows);
      json b = json::array();
      for (Eigen::Index r = 0; r < g.op(id).bias.size(); ++r) b.push_back(g.op(id).bias[r]);
      n["b"] = std::move(b);
    }
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  return doc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

CompGraph load_network(const std::filesystem::path& path) { return network_from_json(read_json_file(path)); }

void save_network(const CompGraph& g, const std::filesystem::path& path) {
  write_json_file(network_to_json(g), path);
}

}  // namespace nnreach
