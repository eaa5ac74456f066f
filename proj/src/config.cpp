#include "bsq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "bsq/error.hpp"

namespace bsq {

using nlohmann::json;

namespace {

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    node_ = &parent.at(name);
    if (!node_->is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  }
  Section(const json& obj, std::string name, bool) : name_(std::move(name)), node_(&obj) {
    if (!obj.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (!node_ || std::uncaught_exceptions() > 0) return;
    for (const auto& item : node_->items())
      if (!used_.count(item.key())) throw ConfigError("config: unknown key '" + (name_.empty() ? "" : name_ + ".") + item.key() + "'");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const json& v = node_->at(key);
    if constexpr (std::is_same_v<T, double>) {
      if (v.is_null()) {  // null stands for infinity
        out = kInfinity;
        return;
      }
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }
  const json* child(const std::string& key) {
    used_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> used_;
};

void read_covariance(const json* node, const std::string& name, CovarianceConfig& c) {
  if (!node) return;
  Section s(*node, name, true);
  s.get("law", c.law);
  s.get("amplitude", c.amplitude);
  s.get("exponent", c.exponent);
  s.get("cutoff", c.cutoff);
  s.get("trace", c.trace);
  s.get("require_admissible", c.require_admissible);
}

void read_sigma(const json* node, const std::string& name, Sigma& sg) {
  if (!node) return;
  Section s(*node, name, true);
  std::string shape(to_string(sg.shape));
  s.get("shape", shape);
  try {
    sg.shape = sigma_shape_from_string(shape);
  } catch (const std::exception&) {
    throw ConfigError("config: unknown sigma shape '" + shape + "'");
  }
  s.get("c0", sg.c0);
  s.get("c1", sg.c1);
}

json covariance_json(const CovarianceConfig& c) {
  return {{"law", c.law},     {"amplitude", c.amplitude}, {"exponent", c.exponent},
          {"cutoff", c.cutoff}, {"trace", c.trace},         {"require_admissible", c.require_admissible}};
}

json sigma_json(const Sigma& s) { return {{"shape", std::string(to_string(s.shape))}, {"c0", s.c0}, {"c1", s.c1}}; }

// Infinity has no JSON literal; it is written as null.
json number_or_null(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (n < 4 || n % 2 != 0) throw ConfigError("grid: n must be even and >= 4");
  if (temperature_basis == ScalarBasis::Periodic && model.c_l != 0.0)
    throw ConfigError("grid: a periodic temperature requires T_0 = T_L");
  if (n_ref < 1) throw ConfigError("study: n_ref must be >= 1");
  if (samples < 1) throw ConfigError("study: samples must be >= 1");
  if (threads < 0) throw ConfigError("study: threads must be >= 0");
  if (n_list.empty()) throw ConfigError("study: n_list must not be empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const int m = n_list[i];
    if (m < 1 || n_ref % m != 0)
      throw ConfigError("study: every N must divide n_ref (N = " + std::to_string(m) + ")");
    if (i > 0 && m <= n_list[i - 1]) throw ConfigError("study: n_list must be strictly increasing");
  }
  if (!(model.horizon / n_list.front() < 1.0)) throw ConfigError("study: T / N must be < 1 for every N");
  if (!(model.horizon / n_ref < 1.0)) throw ConfigError("study: T / n_ref must be < 1");
  if (initial.type != "zero" && initial.type != "smooth" && initial.type != "gaussian")
    throw ConfigError("initial: type must be zero, smooth or gaussian");
  if (initial.band < 1 || 2 * initial.band >= n) throw ConfigError("initial: band must be in [1, n / 2)");
  if (initial.amplitude_u < 0.0 || initial.amplitude_theta < 0.0)
    throw ConfigError("initial: amplitudes must be >= 0");
  if (solver.tol <= 0.0 || solver.max_iter < 1 || solver.restart < 1 || solver.picard_max < 1)
    throw ConfigError("solver: tolerances and iteration limits must be positive");
  if (!(c4 > 0.0) || !(gamma > 0.0)) throw ConfigError("constants: c4 and gamma must be > 0");
  if (gamma0 < 0.0 || gamma0_tilde < 0.0) throw ConfigError("constants: gamma0 values must be >= 0");
  for (int p : p_list)
    if (p < 1 || (p & (p - 1)) != 0) throw ConfigError("moments: p values must be powers of two");
  for (double b : beta_factors)
    if (!(b >= 0.0)) throw ConfigError("expmoments: beta factors must be >= 0");
  if (exp_functional != "auto" && exp_functional != "coupled" && exp_functional != "temperature" &&
      exp_functional != "velocity")
    throw ConfigError("expmoments: functional must be auto, coupled, temperature or velocity");
  for (double m : m_list)
    if (!(m >= 0.0)) throw ConfigError("localize: M values must be >= 0");
  for (int lag : lags)
    if (lag < 1) throw ConfigError("increments: lags must be >= 1");
  for (double a : anchors)
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("increments: anchors must lie in [0, 1)");
  noise_model();
}

NoiseModel RunConfig::noise_model() const {
  if (noise_kind == NoiseKind::Additive) return NoiseModel::additive();
  return NoiseModel::multiplicative(sigma_u, sigma_theta, l1, l1_tilde);
}

RunConfig load_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;
  {
    Section top(root, "", true);
    for (const char* key : {"model", "grid", "noise", "initial", "solver", "study", "constants", "moments",
                            "expmoments", "localize", "probability", "increments"})
      top.child(key);
  }
  {
    Section s(root, "model");
    double nu = 1, kappa = 1, length = 1, horizon = 1, t0 = 0, tl = 0;
    s.get("nu", nu);
    s.get("kappa", kappa);
    s.get("length", length);
    s.get("horizon", horizon);
    s.get("t0", t0);
    s.get("tl", tl);
    if (s.has("c_l")) {
      if (s.has("tl")) throw ConfigError("config: give either model.tl or model.c_l");
      double c_l = 0.0;
      s.get("c_l", c_l);
      tl = t0 + c_l * length;
    } else {
      s.get("c_l", tl);  // marks the key as known
    }
    cfg.model = ModelParams::make(nu, kappa, length, horizon, t0, tl);
  }
  {
    Section s(root, "grid");
    s.get("n", cfg.n);
    std::string basis(to_string(cfg.temperature_basis));
    s.get("temperature_basis", basis);
    try {
      cfg.temperature_basis = scalar_basis_from_string(basis);
    } catch (const std::exception&) {
      throw ConfigError("config: unknown temperature basis '" + basis + "'");
    }
  }
  {
    Section s(root, "noise");
    std::string kind(to_string(cfg.noise_kind));
    s.get("kind", kind);
    try {
      cfg.noise_kind = noise_kind_from_string(kind);
    } catch (const std::exception&) {
      throw ConfigError("config: unknown noise kind '" + kind + "'");
    }
    read_covariance(s.child("velocity"), "noise.velocity", cfg.cov_u);
    read_covariance(s.child("temperature"), "noise.temperature", cfg.cov_theta);
    read_sigma(s.child("sigma_velocity"), "noise.sigma_velocity", cfg.sigma_u);
    read_sigma(s.child("sigma_temperature"), "noise.sigma_temperature", cfg.sigma_theta);
    s.get("l1", cfg.l1);
    s.get("l1_tilde", cfg.l1_tilde);
  }
  {
    Section s(root, "initial");
    s.get("type", cfg.initial.type);
    s.get("amplitude_u", cfg.initial.amplitude_u);
    s.get("amplitude_theta", cfg.initial.amplitude_theta);
    s.get("band", cfg.initial.band);
    s.get("decay", cfg.initial.decay);
  }
  {
    Section s(root, "solver");
    s.get("tol", cfg.solver.tol);
    s.get("max_iter", cfg.solver.max_iter);
    s.get("restart", cfg.solver.restart);
    s.get("picard_tol", cfg.solver.picard_tol);
    s.get("picard_max", cfg.solver.picard_max);
    std::string scheme = cfg.scheme == SchemeVariant::SemiImplicit ? "semi_implicit" : "fully_implicit";
    s.get("scheme", scheme);
    if (scheme == "semi_implicit")
      cfg.scheme = SchemeVariant::SemiImplicit;
    else if (scheme == "fully_implicit")
      cfg.scheme = SchemeVariant::FullyImplicit;
    else
      throw ConfigError("config: solver.scheme must be semi_implicit or fully_implicit");
  }
  {
    Section s(root, "study");
    s.get("n_list", cfg.n_list);
    s.get("n_ref", cfg.n_ref);
    s.get("samples", cfg.samples);
    s.get("seed", cfg.seed);
    s.get("threads", cfg.threads);
    std::string out = cfg.output.string();
    s.get("output", out);
    cfg.output = out;
  }
  {
    Section s(root, "constants");
    s.get("c4", cfg.c4);
    s.get("gamma", cfg.gamma);
    s.get("gamma0", cfg.gamma0);
    s.get("gamma0_tilde", cfg.gamma0_tilde);
  }
  {
    Section s(root, "moments");
    s.get("p_list", cfg.p_list);
  }
  {
    Section s(root, "expmoments");
    s.get("beta_factors", cfg.beta_factors);
    s.get("functional", cfg.exp_functional);
  }
  {
    Section s(root, "localize");
    s.get("m_list", cfg.m_list);
    s.get("eta", cfg.eta);
  }
  {
    Section s(root, "probability");
    s.get("exponent", cfg.probability_exponent);
  }
  {
    Section s(root, "increments");
    s.get("lags", cfg.lags);
    s.get("anchors", cfg.anchors);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"nu", c.model.nu},   {"kappa", c.model.kappa}, {"length", c.model.length},
                {"horizon", c.model.horizon}, {"t0", c.model.t0}, {"tl", c.model.tl}};
  j["grid"] = {{"n", c.n}, {"temperature_basis", std::string(to_string(c.temperature_basis))}};
  j["noise"] = {{"kind", std::string(to_string(c.noise_kind))},
                {"velocity", covariance_json(c.cov_u)},
                {"temperature", covariance_json(c.cov_theta)},
                {"sigma_velocity", sigma_json(c.sigma_u)},
                {"sigma_temperature", sigma_json(c.sigma_theta)},
                {"l1", c.l1},
                {"l1_tilde", c.l1_tilde}};
  j["initial"] = {{"type", c.initial.type},   {"amplitude_u", c.initial.amplitude_u},
                  {"amplitude_theta", c.initial.amplitude_theta}, {"band", c.initial.band},
                  {"decay", c.initial.decay}};
  j["solver"] = {{"tol", c.solver.tol},
                 {"max_iter", c.solver.max_iter},
                 {"restart", c.solver.restart},
                 {"picard_tol", c.solver.picard_tol},
                 {"picard_max", c.solver.picard_max},
                 {"scheme", c.scheme == SchemeVariant::SemiImplicit ? "semi_implicit" : "fully_implicit"}};
  j["study"] = {{"n_list", c.n_list}, {"n_ref", c.n_ref},     {"samples", c.samples},
                {"seed", c.seed},     {"threads", c.threads}, {"output", c.output.string()}};
  j["constants"] = {{"c4", c.c4},
                    {"gamma", c.gamma},
                    {"gamma0", number_or_null(c.gamma0)},
                    {"gamma0_tilde", number_or_null(c.gamma0_tilde)}};
  j["moments"] = {{"p_list", c.p_list}};
  j["expmoments"] = {{"beta_factors", c.beta_factors}, {"functional", c.exp_functional}};
  j["localize"] = {{"m_list", c.m_list}, {"eta", c.eta}};
  j["probability"] = {{"exponent", c.probability_exponent}};
  j["increments"] = {{"lags", c.lags}, {"anchors", c.anchors}};
  return j.dump(2);
}

Problem::Problem(RunConfig config) : cfg(std::move(config)) {
  cfg.validate();
  grid = Grid::create(cfg.model.length, cfg.n, cfg.n);
  cov_u = std::make_shared<const CovarianceSpec>(CovarianceSpec::velocity(grid, cfg.cov_u));
  cov_theta = std::make_shared<const CovarianceSpec>(CovarianceSpec::scalar(grid, cfg.temperature_basis, cfg.cov_theta));
  noise = cfg.noise_model();
}

}  // namespace bsq
