#include "equiaug/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

namespace equiaug::data {

std::string origin_tag(Origin o) {
  switch (o) {
    case Origin::original: return "original";
    case Origin::augmented: return "augmented";
    case Origin::relabeled: return "relabeled";
  }
  return "original";
}

Origin origin_from_tag(const std::string& tag) {
  if (tag == "original") return Origin::original;
  if (tag == "augmented") return Origin::augmented;
  if (tag == "relabeled") return Origin::relabeled;
  throw SchemaError("unknown origin tag: " + tag);
}

std::vector<std::vector<std::size_t>> Dataset::trajectories() const {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < transitions.size(); ++i)
    by_id[transitions[i].traj_id].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(by_id.size());
  for (auto& [id, idx] : by_id) {
    std::sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) {
      return transitions[a].t < transitions[b].t;
    });
    out.push_back(std::move(idx));
  }
  return out;
}

bool transitions_equal(const Transition& a, const Transition& b) {
  return a.s == b.s && a.a == b.a && a.r == b.r && a.s2 == b.s2 && a.g == b.g &&
         a.done == b.done && a.traj_id == b.traj_id && a.t == b.t && a.origin == b.origin;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.env_tag != b.env_tag || a.sdim != b.sdim || a.adim != b.adim || a.gdim != b.gdim ||
      a.seed != b.seed || a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!transitions_equal(a.transitions[i], b.transitions[i])) return false;
  return true;
}

namespace {

nlohmann::json vec_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (index_t i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector json_vec(const nlohmann::json& arr, int expected, const char* field, int line) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != expected)
    throw SchemaError("dataset line " + std::to_string(line) + ": field '" + field +
                      "' has wrong length");
  Vector v(expected);
  for (int i = 0; i < expected; ++i) v[i] = arr[i].get<scalar_t>();
  return v;
}

}  // namespace

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "save_dataset: cannot open " + path.string());

  nlohmann::json meta;
  meta["env"] = d.env_tag;
  meta["sdim"] = d.sdim;
  meta["adim"] = d.adim;
  meta["gdim"] = d.gdim;
  meta["seed"] = d.seed;
  out << meta.dump() << "\n";

  for (const Transition& tr : d.transitions) {
    nlohmann::json j;
    j["s"] = vec_json(tr.s);
    j["a"] = vec_json(tr.a);
    j["r"] = static_cast<int>(tr.r);
    j["s2"] = vec_json(tr.s2);
    j["g"] = vec_json(tr.g);
    j["done"] = tr.done ? 1 : 0;
    j["traj"] = tr.traj_id;
    j["t"] = tr.t;
    j["origin"] = origin_tag(tr.origin);
    out << j.dump() << "\n";
  }
  require(out.good(), "save_dataset: write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("load_dataset: cannot open " + path.string());

  std::string line;
  int line_no = 0;
  auto next_json = [&](nlohmann::json& j) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
      }
      return true;
    }
    return false;
  };

  nlohmann::json meta;
  if (!next_json(meta)) throw ParseError("load_dataset: empty file " + path.string());

  Dataset d;
  try {
    d.env_tag = meta.at("env").get<std::string>();
    d.sdim = meta.at("sdim").get<int>();
    d.adim = meta.at("adim").get<int>();
    d.gdim = meta.at("gdim").get<int>();
    d.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("dataset metadata: " + std::string(e.what()));
  }

  nlohmann::json j;
  while (next_json(j)) {
    Transition tr;
    try {
      tr.s = json_vec(j.at("s"), d.sdim, "s", line_no);
      tr.a = json_vec(j.at("a"), d.adim, "a", line_no);
      tr.r = j.at("r").get<scalar_t>();
      tr.s2 = json_vec(j.at("s2"), d.sdim, "s2", line_no);
      tr.g = json_vec(j.at("g"), d.gdim, "g", line_no);
      tr.done = j.at("done").get<int>() != 0;
      tr.traj_id = j.at("traj").get<int>();
      tr.t = j.at("t").get<int>();
      tr.origin = origin_from_tag(j.at("origin").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (tr.r != 0.0 && tr.r != 1.0)
      throw SchemaError("dataset line " + std::to_string(line_no) + ": reward not in {0,1}");
    d.transitions.push_back(std::move(tr));
  }
  return d;
}

}  // namespace equiaug::data
