#include "equiaug/mlp.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace equiaug::diff {

namespace {

Matrix apply_activation(Activation act, Matrix x) {
  if (act == Activation::tanh) return x.array().tanh().matrix();
  return x;
}

}  // namespace

MlpNetwork mlp_init(int input_dim, const std::vector<int>& hidden_dims,
                    int output_dim, std::uint64_t seed) {
  require(input_dim >= 1, "mlp_init: input_dim must be >= 1");
  require(output_dim >= 1, "mlp_init: output_dim must be >= 1");
  for (int h : hidden_dims) require(h >= 1, "mlp_init: hidden dim must be >= 1");

  Rng rng(seed);
  MlpNetwork net;
  net.input_dim = input_dim;
  net.output_dim = output_dim;

  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);

  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    MlpLayer layer;
    const int fan_in = dims[k];
    const int fan_out = dims[k + 1];
    const scalar_t s = 1.0 / std::sqrt(static_cast<scalar_t>(fan_in));
    layer.w = Matrix(fan_in, fan_out);
    for (index_t i = 0; i < layer.w.rows(); ++i)
      for (index_t j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = s * rng.normal();
    layer.b = Matrix::Zero(1, fan_out);
    layer.act = (k + 2 == dims.size()) ? Activation::identity : Activation::tanh;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix mlp_forward(const MlpNetwork& net, const Matrix& input) {
  require(input.cols() == net.input_dim, "mlp_forward: input width mismatch");
  Matrix x = input;
  for (const MlpLayer& layer : net.layers) {
    x = apply_activation(layer.act, (x * layer.w).rowwise() + layer.b.row(0));
  }
  return x;
}

Vector mlp_forward(const MlpNetwork& net, const Vector& input) {
  Matrix row = input.transpose();
  return mlp_forward(net, row).row(0).transpose();
}

MlpOnTape mlp_on_tape(Tape& t, const MlpNetwork& net) {
  MlpOnTape p;
  for (const MlpLayer& layer : net.layers) {
    p.layers.emplace_back(t.constant(layer.w), t.constant(layer.b));
  }
  return p;
}

NodeId mlp_forward(Tape& t, const MlpNetwork& net, const MlpOnTape& params, NodeId input) {
  require(t.value(input).cols() == net.input_dim, "mlp_forward: input width mismatch");
  NodeId x = input;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    x = t.add(t.matmul(x, params.layers[k].first), params.layers[k].second);
    if (net.layers[k].act == Activation::tanh) x = t.tanh(x);
  }
  return x;
}

NodeId mlp_forward_frozen(Tape& t, const MlpNetwork& net, NodeId leading,
                          const Matrix& trailing) {
  const index_t lead_cols = t.value(leading).cols();
  require(lead_cols + trailing.cols() == net.input_dim,
          "mlp_forward_frozen: input width mismatch");
  require(t.value(leading).rows() == trailing.rows(),
          "mlp_forward_frozen: batch size mismatch");

  // First layer: split the weight rows between the taped and constant blocks,
  // so no concatenation primitive is needed.
  const MlpLayer& first = net.layers.front();
  const Matrix w_lead = first.w.topRows(lead_cols);
  const Matrix w_trail = first.w.bottomRows(trailing.cols());
  NodeId x = t.add(t.matmul(leading, t.constant(w_lead)),
                   t.constant(Matrix((trailing * w_trail).rowwise() + first.b.row(0))));
  if (first.act == Activation::tanh) x = t.tanh(x);

  for (std::size_t k = 1; k < net.layers.size(); ++k) {
    const MlpLayer& layer = net.layers[k];
    x = t.add(t.matmul(x, t.constant(layer.w)), t.constant(layer.b));
    if (layer.act == Activation::tanh) x = t.tanh(x);
  }
  return x;
}

std::vector<Matrix*> mlp_params(MlpNetwork& net) {
  std::vector<Matrix*> out;
  for (MlpLayer& layer : net.layers) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
  }
  return out;
}

std::vector<Matrix> mlp_grads(const Tape& t, const MlpOnTape& params) {
  std::vector<Matrix> out;
  for (const auto& [w, b] : params.layers) {
    out.push_back(t.adjoint(w));
    out.push_back(t.adjoint(b));
  }
  return out;
}

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (index_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (index_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix rows_matrix(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw SchemaError("weights: empty matrix");
  const index_t r = static_cast<index_t>(rows.size());
  const index_t c = static_cast<index_t>(rows[0].size());
  Matrix m(r, c);
  for (index_t i = 0; i < r; ++i) {
    if (static_cast<index_t>(rows[i].size()) != c)
      throw SchemaError("weights: ragged matrix rows");
    for (index_t j = 0; j < c; ++j) m(i, j) = rows[i][j].get<scalar_t>();
  }
  return m;
}

}  // namespace

void save_mlp(const MlpNetwork& net, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["input_dim"] = net.input_dim;
  doc["layers"] = nlohmann::json::array();
  for (const MlpLayer& layer : net.layers) {
    nlohmann::json jl;
    jl["w"] = matrix_rows(layer.w);
    jl["b"] = nlohmann::json::array();
    for (index_t j = 0; j < layer.b.cols(); ++j) jl["b"].push_back(layer.b(0, j));
    jl["act"] = layer.act == Activation::tanh ? "tanh" : "id";
    doc["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  require(out.good(), "save_mlp: cannot open " + path.string());
  out << doc.dump(1) << "\n";
}

MlpNetwork load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("load_mlp: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_mlp: " + std::string(e.what()));
  }
  MlpNetwork net;
  net.input_dim = doc.at("input_dim").get<int>();
  index_t prev = net.input_dim;
  for (const auto& jl : doc.at("layers")) {
    MlpLayer layer;
    layer.w = rows_matrix(jl.at("w"));
    const auto& jb = jl.at("b");
    layer.b = Matrix::Zero(1, static_cast<index_t>(jb.size()));
    for (index_t j = 0; j < layer.b.cols(); ++j) layer.b(0, j) = jb[j].get<scalar_t>();
    const std::string act = jl.at("act").get<std::string>();
    if (act == "tanh") {
      layer.act = Activation::tanh;
    } else if (act == "id") {
      layer.act = Activation::identity;
    } else {
      throw SchemaError("load_mlp: unknown activation tag " + act);
    }
    if (layer.w.rows() != prev) throw SchemaError("load_mlp: layer dims do not chain");
    if (layer.w.cols() != layer.b.cols()) throw SchemaError("load_mlp: bias width mismatch");
    prev = layer.w.cols();
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw SchemaError("load_mlp: no layers");
  net.output_dim = static_cast<int>(prev);
  return net;
}

}  // namespace equiaug::diff
