#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "unijac/objectives.hpp"
#include "unijac/solvers.hpp"
#include "unijac/tensor.hpp"

namespace unijac {

using json = nlohmann::json;

/// {"dims": [...], "data": [[re, im], ...]} in first-index-fastest order.
inline json tensor_to_json(const DenseTensor& t) {
  json j;
  j["dims"] = t.dims();
  json data = json::array();
  for (const Complex& z : t.data()) data.push_back({z.real(), z.imag()});
  j["data"] = std::move(data);
  return j;
}

inline DenseTensor tensor_from_json(const json& j) {
  if (!j.contains("dims") || !j.contains("data")) {
    throw std::invalid_argument("tensor JSON needs 'dims' and 'data'");
  }
  const auto dims = j.at("dims").get<std::vector<Index>>();
  std::vector<Complex> data;
  data.reserve(j.at("data").size());
  for (const auto& e : j.at("data")) {
    if (e.is_number()) {
      data.emplace_back(e.get<double>(), 0.0);
    } else if (e.is_array() && e.size() == 2) {
      data.emplace_back(e[0].get<double>(), e[1].get<double>());
    } else {
      throw std::invalid_argument("tensor JSON entries must be numbers or [re, im] pairs");
    }
  }
  return DenseTensor(dims, std::move(data));
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

/// Problem file: family, dagger, ranks, weights, gamma, real, and tensors given
/// either inline or as paths relative to the problem file.
inline ProblemSpec problem_from_json(const json& j, const std::filesystem::path& base = {}) {
  ProblemSpec spec;
  spec.family = family_from_string(j.value("family", std::string("jatd")));
  spec.dagger = dagger_from_string(j.value("dagger", std::string("H")));
  if (j.contains("ranks")) spec.ranks = j.at("ranks").get<std::vector<Index>>();
  if (j.contains("weights")) spec.weights = j.at("weights").get<std::vector<double>>();
  spec.gamma = j.value("gamma", Index{1});
  spec.real = j.value("real", false);
  if (!j.contains("tensors")) throw std::invalid_argument("problem JSON needs 'tensors'");
  for (const auto& t : j.at("tensors")) {
    if (t.is_string()) {
      std::filesystem::path p = t.get<std::string>();
      if (p.is_relative()) p = base / p;
      spec.tensors.push_back(tensor_from_json(read_json_file(p)));
    } else {
      spec.tensors.push_back(tensor_from_json(t));
    }
  }
  spec.validate();
  return spec;
}

inline json problem_to_json(const ProblemSpec& spec) {
  json j;
  j["family"] = to_string(spec.family);
  j["dagger"] = to_string(spec.dagger);
  j["ranks"] = spec.ranks;
  if (!spec.weights.empty()) j["weights"] = spec.weights;
  j["gamma"] = spec.gamma;
  j["real"] = spec.real;
  json ts = json::array();
  for (const auto& t : spec.tensors) ts.push_back(tensor_to_json(t));
  j["tensors"] = std::move(ts);
  return j;
}

inline ProblemSpec read_problem(const std::filesystem::path& path) {
  return problem_from_json(read_json_file(path), path.parent_path());
}

/// Iteration log, 1-based mode and indices.
inline void write_log_csv(std::ostream& out, const SolveResult& res, bool proximal) {
  out << "k,f,grad_norm,p,i,j,theta,phi,step_norm,slack\n";
  out << std::setprecision(17);
  for (const auto& r : res.records) {
    out << r.k << ',' << r.f << ',' << r.grad_norm << ',' << r.p + 1 << ',' << r.i + 1 << ','
        << r.j + 1 << ',' << r.theta << ',' << r.phi << ',' << r.step_norm << ','
        << (proximal ? r.prox_slack : r.slack) << '\n';
  }
}

}  // namespace unijac
