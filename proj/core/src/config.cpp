#include "sensorsched/config.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sensorsched {

using nlohmann::json;

namespace {

[[noreturn]] void Fail(const std::string& key, const std::string& why) {
  throw ConfigError("config: " + key + ": " + why);
}

const json* Child(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double Number(const json& j, const std::string& key) {
  if (!j.is_number()) Fail(key, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) Fail(key, "must be finite");
  return x;
}

int Integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) Fail(key, "expected an integer");
  return j.get<int>();
}

Eigen::MatrixXd Matrix(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) Fail(key, "expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) Fail(key, "rows must be nonempty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      Fail(key, "row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = Number(row[c], key + "[" + std::to_string(r) + "][" +
                                   std::to_string(c) + "]");
    }
  }
  return m;
}

json MatrixJson(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

SensorCostSpec ParseCost(const json& j) {
  if (j.is_string()) {
    const auto kind = j.get<std::string>();
    if (kind == "exactly_one") return SensorCostSpec::ExactlyOne();
    if (kind == "cardinality") return SensorCostSpec::Cardinality();
    Fail("synthesis.cost", "unknown kind '" + kind + "'");
  }
  if (!j.is_object()) Fail("synthesis.cost", "expected a string or an object");
  const json* kind_j = Child(j, "kind");
  if (!kind_j || !kind_j->is_string()) Fail("synthesis.cost.kind", "missing");
  const auto kind = kind_j->get<std::string>();
  SensorCostSpec spec;
  if (kind == "exactly_one") {
    spec = SensorCostSpec::ExactlyOne();
  } else if (kind == "cardinality") {
    spec = SensorCostSpec::Cardinality();
  } else if (kind == "at_most_k") {
    const json* k = Child(j, "k");
    if (!k) Fail("synthesis.cost.k", "required for at_most_k");
    spec = SensorCostSpec::AtMostK(Integer(*k, "synthesis.cost.k"));
  } else if (kind == "custom") {
    const json* table = Child(j, "table");
    if (!table || !table->is_array()) {
      Fail("synthesis.cost.table", "expected an array of {sensors, cost}");
    }
    std::map<SensorSubset, double> entries;
    for (const json& e : *table) {
      const json* sensors = e.is_object() ? Child(e, "sensors") : nullptr;
      const json* cost = e.is_object() ? Child(e, "cost") : nullptr;
      if (!sensors || !sensors->is_array() || !cost) {
        Fail("synthesis.cost.table", "entries need 'sensors' and 'cost'");
      }
      std::vector<int> idx;
      for (const json& s : *sensors) idx.push_back(Integer(s, "synthesis.cost.table.sensors"));
      std::sort(idx.begin(), idx.end());
      double value;
      if (cost->is_string() && cost->get<std::string>() == "inf") {
        value = std::numeric_limits<double>::infinity();
      } else {
        value = Number(*cost, "synthesis.cost.table.cost");
      }
      try {
        entries[SensorSubset(idx)] = value;
      } catch (const std::invalid_argument& e) {
        Fail("synthesis.cost.table.sensors", e.what());
      }
    }
    spec = SensorCostSpec::Custom(std::move(entries));
  } else {
    Fail("synthesis.cost.kind", "unknown kind '" + kind + "'");
  }
  if (const json* weight = Child(j, "weight")) {
    spec.weight = Matrix(*weight, "synthesis.cost.weight");
  }
  return spec;
}

Quantizer ParseQuantizer(const std::string& s) {
  if (s == "theta") return Quantizer::Theta;
  if (s == "theta-pp") return Quantizer::ThetaDoublePrime;
  Fail("synthesis.quantizer", "expected 'theta' or 'theta-pp'");
}

Lookahead ParseLookahead(const std::string& s) {
  if (s == "one") return Lookahead::OneLevel;
  if (s == "two") return Lookahead::TwoLevel;
  Fail("synthesis.lookahead", "expected 'one' or 'two'");
}

void CheckSquare(const Eigen::MatrixXd& m, Eigen::Index n, const std::string& key) {
  if (m.rows() != n || m.cols() != n) {
    Fail(key, "expected " + std::to_string(n) + "x" + std::to_string(n) +
                  ", got " + std::to_string(m.rows()) + "x" +
                  std::to_string(m.cols()));
  }
}

}  // namespace

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double ParseRational(std::string_view text) {
  auto parse = [&](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
      s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
      s.remove_suffix(1);
    }
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x)) {
      throw ConfigError("not a number: '" + std::string(text) + "'");
    }
    return x;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse(text);
  const double num = parse(text.substr(0, slash));
  const double den = parse(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + std::string(text) + "'");
  return num / den;
}

SystemModel ExperimentConfig::Model() const {
  try {
    return SystemModel(a, w, c, v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: system: ") + e.what());
  }
}

std::uint64_t ExperimentConfig::MeshHash() const {
  const json j = {{"n", synthesis.mesh.n},
                  {"epsilon", synthesis.mesh.epsilon},
                  {"gamma", synthesis.mesh.gamma}};
  return Fnv1a(j.dump());
}

std::uint64_t ExperimentConfig::SynthesisHash() const {
  json j = {{"A", MatrixJson(a)},
            {"W", MatrixJson(w)},
            {"C", MatrixJson(c)},
            {"V", MatrixJson(v)},
            {"beta", synthesis.beta},
            {"n", synthesis.mesh.n},
            {"epsilon", synthesis.mesh.epsilon},
            {"gamma", synthesis.mesh.gamma},
            {"cost", synthesis.cost.Describe()},
            {"quantizer", ToString(synthesis.quantizer)},
            {"tol", synthesis.convergence_tol},
            {"max_iterations", synthesis.max_iterations}};
  return Fnv1a(j.dump());
}

ExperimentConfig ParseConfig(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) Fail("<root>", "expected an object");

  ExperimentConfig cfg;
  const json* sys = Child(root, "system");
  if (!sys || !sys->is_object()) Fail("system", "missing");
  for (const char* key : {"A", "W", "C", "V"}) {
    if (!Child(*sys, key)) Fail(std::string("system.") + key, "missing");
  }
  cfg.a = Matrix((*sys)["A"], "system.A");
  const Eigen::Index n = cfg.a.rows();
  CheckSquare(cfg.a, n, "system.A");
  cfg.w = Matrix((*sys)["W"], "system.W");
  CheckSquare(cfg.w, n, "system.W");
  cfg.c = Matrix((*sys)["C"], "system.C");
  if (cfg.c.cols() != n) {
    Fail("system.C", "expected " + std::to_string(n) + " columns, got " +
                         std::to_string(cfg.c.cols()));
  }
  const json& vj = (*sys)["V"];
  if (vj.is_array() && !vj.empty() && vj[0].is_number()) {
    // A flat list is read as the diagonal of V.
    Eigen::VectorXd d(vj.size());
    for (std::size_t i = 0; i < vj.size(); ++i) {
      d(i) = Number(vj[i], "system.V[" + std::to_string(i) + "]");
    }
    cfg.v = d.asDiagonal();
  } else {
    cfg.v = Matrix(vj, "system.V");
  }
  CheckSquare(cfg.v, cfg.c.rows(), "system.V");

  const json* syn = Child(root, "synthesis");
  if (!syn || !syn->is_object()) Fail("synthesis", "missing");
  auto& s = cfg.synthesis;
  s.mesh.n = static_cast<int>(n);
  if (const json* j = Child(*syn, "beta")) s.beta = Number(*j, "synthesis.beta");
  const json* eps = Child(*syn, "epsilon");
  if (!eps) Fail("synthesis.epsilon", "missing");
  if (eps->is_string()) {
    cfg.epsilon_text = eps->get<std::string>();
    try {
      s.mesh.epsilon = ParseRational(cfg.epsilon_text);
    } catch (const ConfigError& e) {
      Fail("synthesis.epsilon", e.what());
    }
  } else {
    s.mesh.epsilon = Number(*eps, "synthesis.epsilon");
    cfg.epsilon_text = eps->dump();
  }
  const json* gamma = Child(*syn, "gamma");
  if (!gamma) Fail("synthesis.gamma", "missing");
  s.mesh.gamma = Number(*gamma, "synthesis.gamma");
  if (const json* j = Child(*syn, "cost")) s.cost = ParseCost(*j);
  if (const json* j = Child(*syn, "quantizer")) {
    if (!j->is_string()) Fail("synthesis.quantizer", "expected a string");
    s.quantizer = ParseQuantizer(j->get<std::string>());
  }
  if (const json* j = Child(*syn, "lookahead")) {
    if (!j->is_string()) Fail("synthesis.lookahead", "expected a string");
    s.lookahead = ParseLookahead(j->get<std::string>());
  }
  if (const json* j = Child(*syn, "convergence_tol")) {
    s.convergence_tol = Number(*j, "synthesis.convergence_tol");
  }
  if (const json* j = Child(*syn, "max_iterations")) {
    s.max_iterations = Integer(*j, "synthesis.max_iterations");
  }
  if (const json* j = Child(*syn, "threads")) {
    s.threads = Integer(*j, "synthesis.threads");
  }
  if (s.cost.weight) CheckSquare(*s.cost.weight, n, "synthesis.cost.weight");
  try {
    s.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: synthesis: ") + e.what());
  }

  if (const json* exp = Child(root, "experiment")) {
    if (!exp->is_object()) Fail("experiment", "expected an object");
    auto& x = cfg.experiment;
    if (const json* j = Child(*exp, "initial_covariances")) {
      if (!j->is_array()) Fail("experiment.initial_covariances", "expected a list");
      for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string key = "experiment.initial_covariances[" + std::to_string(i) + "]";
        Eigen::MatrixXd p;
        if ((*j)[i].is_string() && (*j)[i].get<std::string>() == "identity") {
          p = Eigen::MatrixXd::Identity(n, n);
        } else {
          p = Matrix((*j)[i], key);
        }
        CheckSquare(p, n, key);
        if (!CheckPsd(p)) Fail(key, "not symmetric positive semidefinite");
        x.initial_covariances.push_back(p);
      }
    }
    if (const json* j = Child(*exp, "lambda_sweep")) {
      if (const json* k = Child(*j, "scale")) {
        x.lambda_scale = Number(*k, "experiment.lambda_sweep.scale");
      }
      if (const json* k = Child(*j, "count")) {
        x.lambda_count = Integer(*k, "experiment.lambda_sweep.count");
      }
    }
    if (const json* j = Child(*exp, "horizon")) x.horizon = Integer(*j, "experiment.horizon");
    if (const json* j = Child(*exp, "discount_horizon")) {
      x.discount_horizon = Integer(*j, "experiment.discount_horizon");
    }
    if (const json* j = Child(*exp, "cycle_tol")) x.cycle_tol = Number(*j, "experiment.cycle_tol");
    if (const json* j = Child(*exp, "max_period")) {
      x.max_period = Integer(*j, "experiment.max_period");
    }
    if (const json* j = Child(*exp, "sample_points")) {
      x.sample_points = Integer(*j, "experiment.sample_points");
    }
    if (const json* j = Child(*exp, "seed")) {
      if (!j->is_number_unsigned()) Fail("experiment.seed", "expected a nonnegative integer");
      x.seed = j->get<std::uint64_t>();
    }
    if (x.lambda_scale <= 0.0) Fail("experiment.lambda_sweep.scale", "must be positive");
    if (x.lambda_count < 0) Fail("experiment.lambda_sweep.count", "must be nonnegative");
    if (x.horizon < 1) Fail("experiment.horizon", "must be positive");
    if (x.discount_horizon < 0) Fail("experiment.discount_horizon", "must be nonnegative");
    if (!(x.cycle_tol > 0.0)) Fail("experiment.cycle_tol", "must be positive");
    if (x.max_period < 1) Fail("experiment.max_period", "must be positive");
    if (x.sample_points < 0) Fail("experiment.sample_points", "must be nonnegative");
  }
  if (cfg.experiment.initial_covariances.empty()) {
    cfg.experiment.initial_covariances.push_back(Eigen::MatrixXd::Identity(n, n));
  }

  if (const json* out = Child(root, "output")) {
    if (const json* j = Child(*out, "directory")) {
      if (!j->is_string()) Fail("output.directory", "expected a string");
      cfg.output.directory = j->get<std::string>();
    }
    if (const json* j = Child(*out, "formats")) {
      if (!j->is_array()) Fail("output.formats", "expected a list");
      cfg.output.formats.clear();
      for (const json& f : *j) {
        if (!f.is_string() || f.get<std::string>() != "csv") {
          Fail("output.formats", "only \"csv\" is supported");
        }
        cfg.output.formats.push_back("csv");
      }
    }
  }

  cfg.Model();  // Surfaces W/V definiteness problems now.
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

}  // namespace sensorsched
