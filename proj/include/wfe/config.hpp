#pragma once

// Experiment configuration: JSON text -> validated, defaults-filled structs.
// Every problem is reported with the dotted key path it concerns.

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wfe/admissibility.hpp"
#include "wfe/dynamics.hpp"
#include "wfe/ensembles.hpp"
#include "wfe/observables.hpp"
#include "wfe/toy_model.hpp"

namespace wfe {

struct ConfigIssue {
  std::string path;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(describe(issues)), issues_(std::move(issues)) {}
  ConfigError(const std::string& path, const std::string& message)
      : ConfigError(std::vector<ConfigIssue>{{path, message}}) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

  static std::string describe(const std::vector<ConfigIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += (s.empty() ? "" : "\n") + (i.path.empty() ? "<root>" : i.path) + ": " + i.message;
    return s;
  }

 private:
  std::vector<ConfigIssue> issues_;
};

struct Range {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  bool hi_open = false;

  static Range any() { return {}; }
  static Range positive() { return {0.0, std::numeric_limits<double>::infinity(), true, false}; }
  static Range non_negative() { return {0.0}; }
  static Range closed(double a, double b) { return {a, b}; }
  static Range open(double a, double b) { return {a, b, true, true}; }
  static Range at_least(double a) { return {a}; }

  bool contains(double v) const {
    if (!std::isfinite(v)) return false;
    if (lo_open ? !(v > lo) : !(v >= lo)) return false;
    if (hi_open ? !(v < hi) : !(v <= hi)) return false;
    return true;
  }
  std::string text() const {
    auto b = [](double v) { return std::isinf(v) ? std::string(v < 0 ? "-inf" : "inf") : format_short(v); };
    return std::string(lo_open ? "(" : "[") + b(lo) + ", " + b(hi) + (hi_open ? ")" : "]");
  }
};

/// Reads one JSON object, recording the values it used (defaults included)
/// into `resolved` and flagging keys nobody asked for.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json* j, std::string path, std::vector<ConfigIssue>* issues, nlohmann::json* resolved)
      : j_(j), path_(std::move(path)), issues_(issues), resolved_(resolved) {
    if (j_ && !j_->is_object()) {
      issue("", "must be an object");
      j_ = nullptr;
    }
    if (resolved_ && !resolved_->is_object()) *resolved_ = nlohmann::json::object();
  }

  std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void issue(const std::string& key, const std::string& message) const {
    issues_->push_back({key.empty() ? path_ : path_of(key), message});
  }
  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  double number(const std::string& key, double def, Range r = {}) {
    double v = def;
    if (const auto* x = take(key)) {
      if (!x->is_number()) {
        issue(key, "must be a number");
      } else {
        v = x->get<double>();
        if (!r.contains(v)) issue(key, "value " + format_short(v) + " outside " + r.text());
      }
    }
    record(key, v);
    return v;
  }

  /// Number or null; null and absent give `def` (which may be NaN).
  double optional_number(const std::string& key, double def, Range r = {}) {
    double v = def;
    if (const auto* x = take(key)) {
      if (x->is_null()) {
        v = def;
      } else if (!x->is_number()) {
        issue(key, "must be a number or null");
      } else {
        v = x->get<double>();
        if (!r.contains(v)) issue(key, "value " + format_short(v) + " outside " + r.text());
      }
    }
    if (std::isnan(v)) {
      record_json(key, nullptr);
    } else {
      record(key, v);
    }
    return v;
  }

  long long integer(const std::string& key, long long def, Range r = {}) {
    long long v = def;
    if (const auto* x = take(key)) {
      if (!x->is_number_integer()) {
        issue(key, "must be an integer");
      } else {
        v = x->get<long long>();
        if (!r.contains(static_cast<double>(v))) issue(key, "value " + std::to_string(v) + " outside " + r.text());
      }
    }
    record_json(key, v);
    return v;
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t def) {
    std::uint64_t v = def;
    if (const auto* x = take(key)) {
      if (x->is_number_unsigned()) {
        v = x->get<std::uint64_t>();
      } else {
        issue(key, "must be a non-negative integer");
      }
    }
    record_json(key, v);
    return v;
  }

  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (const auto* x = take(key)) {
      if (!x->is_boolean()) {
        issue(key, "must be true or false");
      } else {
        v = x->get<bool>();
      }
    }
    record_json(key, v);
    return v;
  }

  std::string string(const std::string& key, const std::string& def) {
    std::string v = def;
    if (const auto* x = take(key)) {
      if (!x->is_string()) {
        issue(key, "must be a string");
      } else {
        v = x->get<std::string>();
      }
    }
    record_json(key, v);
    return v;
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    auto v = string(key, def);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      issue(key, "'" + v + "' is not one of {" + list + "}");
      v = def;
    }
    return v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def, Range r = {}) {
    std::vector<double> v = std::move(def);
    if (const auto* x = take(key)) {
      if (!x->is_array() || x->empty()) {
        issue(key, "must be a non-empty array of numbers");
      } else {
        v.clear();
        for (std::size_t i = 0; i < x->size(); ++i) {
          const auto& e = (*x)[i];
          const std::string p = key + "[" + std::to_string(i) + "]";
          if (!e.is_number()) {
            issue(p, "must be a number");
            continue;
          }
          const double d = e.get<double>();
          if (!r.contains(d)) issue(p, "value " + format_short(d) + " outside " + r.text());
          v.push_back(d);
        }
      }
    }
    record_json(key, v);
    return v;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> def, Range r = {}) {
    std::vector<int> v = std::move(def);
    if (const auto* x = take(key)) {
      if (!x->is_array() || x->empty()) {
        issue(key, "must be a non-empty array of integers");
      } else {
        v.clear();
        for (std::size_t i = 0; i < x->size(); ++i) {
          const auto& e = (*x)[i];
          const std::string p = key + "[" + std::to_string(i) + "]";
          if (!e.is_number_integer()) {
            issue(p, "must be an integer");
            continue;
          }
          const long long d = e.get<long long>();
          if (!r.contains(static_cast<double>(d))) issue(p, "value " + std::to_string(d) + " outside " + r.text());
          v.push_back(static_cast<int>(d));
        }
      }
    }
    record_json(key, v);
    return v;
  }

  /// Raw access for structured values (e.g. lists of points).
  const nlohmann::json* raw(const std::string& key) { return take(key); }
  void record_json(const std::string& key, nlohmann::json v) {
    if (resolved_) (*resolved_)[key] = std::move(v);
  }

  ConfigReader child(const std::string& key) {
    const nlohmann::json* sub = take(key);
    if (sub && !sub->is_object()) {
      issue(key, "must be an object");
      sub = nullptr;
    }
    nlohmann::json* res = nullptr;
    if (resolved_) {
      (*resolved_)[key] = nlohmann::json::object();
      res = &(*resolved_)[key];
    }
    return ConfigReader(sub, path_of(key), issues_, res);
  }

  /// Flags keys present in the object but never read.
  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) issues_->push_back({path_of(it.key()), "unknown key '" + it.key() + "'"});
    }
  }

 private:
  const nlohmann::json* take(const std::string& key) {
    used_.insert(key);
    if (!j_ || !j_->contains(key)) return nullptr;
    return &j_->at(key);
  }
  void record(const std::string& key, double v) { record_json(key, v); }

  const nlohmann::json* j_;
  std::string path_;
  std::vector<ConfigIssue>* issues_;
  nlohmann::json* resolved_;
  std::set<std::string> used_;
};

inline QubitAmplitudes read_qubit(ConfigReader r, QubitAmplitudes def) {
  QubitAmplitudes q;
  q.alpha = r.number("alpha", def.alpha, Range::closed(-1.0, 1.0));
  q.beta = r.number("beta", def.beta, Range::closed(-1.0, 1.0));
  q.gamma = r.number("gamma", def.gamma);
  if (std::abs(q.alpha * q.alpha + q.beta * q.beta - 1.0) > 1e-12) {
    r.issue("alpha", "alpha^2 + beta^2 must equal 1");
  }
  r.finish();
  return q;
}

struct ToyRunConfig {
  ToyParams params;
  int record_every = 10;
  IntegratorOptions integrator;
  bool full_space = false;
};

inline ToyParams read_toy_params(ConfigReader& r) {
  ToyParams p;
  p.N = static_cast<int>(r.integer("N", p.N, Range::closed(2, 100000)));
  p.mass = r.number("mass", p.mass, Range::positive());
  p.deltaV = r.number("deltaV", p.deltaV, Range::positive());
  p.alpha_c = r.optional_number("alpha_c", p.alpha_c);
  p.w = r.number("w", p.w, Range::non_negative());
  p.center = r.number("center", p.center, Range::non_negative());
  p.qubit = read_qubit(r.child("qubit"), p.qubit);
  p.include_qubit_in_wfe = r.boolean("include_qubit_in_wfe", p.include_qubit_in_wfe);
  p.rho = r.number("rho", p.rho, Range::non_negative());
  p.T = r.number("T", p.T, Range::positive());
  p.dt = r.number("dt", p.dt, Range::positive());
  p.split = r.optional_number("split", std::numeric_limits<double>::quiet_NaN(), Range::positive());
  if (std::isnan(p.split)) p.split = 0.0;
  {
    auto t = r.child("thresholds");
    p.thresholds.cat = t.number("cat", p.thresholds.cat, {0.0, 0.5, true, false});
    p.thresholds.dominant = t.number("dominant", p.thresholds.dominant, {0.5, 1.0, true, false});
    t.finish();
  }
  if (p.N >= 2) {
    if (p.center > p.R()) r.issue("center", "must not exceed R = (N-1)/2 = " + format_short(p.R()));
    if (p.split > 0.0 && p.split >= p.R()) r.issue("split", "must be below R = " + format_short(p.R()));
  }
  if (p.dt > 0.0 && p.T > 0.0) {
    const double n = p.T / p.dt;
    if (p.T < p.dt || std::abs(n - std::round(n)) > 1e-9 * n) r.issue("T", "must be a positive multiple of dt");
  }
  return p;
}

struct SweepRunConfig {
  SweepSpec spec;
};

struct EnsembleRunConfig {
  CurveSpec spec;
};

struct OperatorsRunConfig {
  std::vector<FamilyKind> candidates{FamilyKind::PositionX, FamilyKind::MomentumPx, FamilyKind::AngularMomentumLz,
                                     FamilyKind::TotalJz};
  GridShape shape{1, 2, 40, 8.0, 2};
  CorrelatedGaussianSpec state{0.3, 0.0, {}, {Point{0.7, -0.4}}, {}};
  int particle = 0;
  AdmissibilityOptions options;
};

struct EstimateRunConfig {
  double w = 1e-25;
  double N = 1e20;
  double R = 1e-2;
  MacroMode mode = MacroMode::Cat;
};

/// Recipe for one named test state.
struct StateRecipe {
  std::string kind = "spin_cat";
  int N = 4;
  std::string representation = "reduced";
  QubitAmplitudes branches{};
  QubitAmplitudes qubit{1.0, 0.0, 0.0};
  double center = 0.5;
  double rho = 0.0;
  GridShape shape{1, 1, 128, 16.0, 1};
  std::string bump = "gaussian";
  double width = 1.0;
  double separation = 5.0;
  double q = 0.5;
  double p0 = 3.0;
  CorrelatedGaussianSpec correlated{};
};

struct StateRunConfig {
  StateRecipe recipe;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string output = "wfe-out";
  std::string format = "csv";
  ToyRunConfig toy;
  SweepRunConfig sweep;
  EnsembleRunConfig ensemble;
  OperatorsRunConfig operators;
  EstimateRunConfig estimate;
  StateRunConfig state;
  nlohmann::json resolved;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"toy", "sweep", "ensemble", "operators", "estimate", "state"};
  return names;
}

inline GridShape read_shape(ConfigReader& r, GridShape def) {
  GridShape g;
  g.particles = static_cast<int>(r.integer("particles", def.particles, Range::closed(1, 2)));
  g.dims = static_cast<int>(r.integer("dims", def.dims, Range::closed(1, 2)));
  g.points = static_cast<int>(r.integer("points", def.points, Range::closed(4, 4096)));
  if (g.points % 2 != 0) r.issue("points", "must be even");
  g.half_width = r.number("half_width", def.half_width, Range::positive());
  g.spin_levels = static_cast<int>(r.integer("spin_levels", def.spin_levels, Range::closed(1, 2)));
  return g;
}

inline std::vector<Point> read_points(ConfigReader& r, const std::string& key, std::vector<Point> def) {
  const auto* x = r.raw(key);
  if (x) {
    bool ok = x->is_array();
    std::vector<Point> v;
    if (ok) {
      for (const auto& e : *x) {
        if (!e.is_array() || e.empty() || e.size() > 2) {
          ok = false;
          break;
        }
        Point p{0.0, 0.0};
        for (std::size_t i = 0; i < e.size(); ++i) {
          if (!e[i].is_number()) ok = false;
          else p[i] = e[i].get<double>();
        }
        v.push_back(p);
      }
    }
    if (!ok) {
      r.issue(key, "must be an array of [x] or [x, y] points");
    } else {
      def = v;
    }
  }
  nlohmann::json echo = nlohmann::json::array();
  for (const auto& p : def) echo.push_back({p[0], p[1]});
  r.record_json(key, echo);
  return def;
}

inline void read_correlated(ConfigReader& r, CorrelatedGaussianSpec& s) {
  s.xy_coupling = r.number("xy_coupling", s.xy_coupling, Range::open(-1.0, 1.0));
  s.pair_coupling = r.number("pair_coupling", s.pair_coupling, Range::open(-1.0, 1.0));
  s.centers = read_points(r, "centers", s.centers);
  s.momenta = read_points(r, "momenta", s.momenta);
}

inline StateRecipe read_state_recipe(ConfigReader& r) {
  StateRecipe s;
  s.kind = r.choice("kind", s.kind,
                    {"spin_cat", "spin_product", "initial_toy", "grid_cat", "grid_mqp", "momentum_cat",
                     "correlated_gaussian"});
  if (s.kind == "spin_cat" || s.kind == "spin_product" || s.kind == "initial_toy") {
    s.N = static_cast<int>(r.integer("N", s.N, Range::closed(2, 100000)));
    s.representation = r.choice("representation", s.kind == "spin_product" ? "full" : s.representation,
                                {"reduced", "full"});
    if (s.representation == "full" && s.N > kMaxFullSpins) r.issue("N", "full representation limited to N <= 24");
    if (s.kind == "spin_product" && s.representation != "full") {
      r.issue("representation", "a spin product state exists only in the full representation");
    }
    s.branches = read_qubit(r.child(s.kind == "spin_cat" ? "branches" : "qubit"), s.branches);
    if (s.kind == "spin_cat") s.qubit = read_qubit(r.child("qubit"), s.qubit);
    if (s.kind == "initial_toy") {
      s.center = r.number("center", s.center, Range::non_negative());
      s.rho = r.number("rho", s.rho, Range::non_negative());
      if (s.representation != "reduced") r.issue("representation", "initial_toy is built in the reduced basis");
    }
  } else if (s.kind == "grid_cat" || s.kind == "grid_mqp") {
    s.shape = read_shape(r, s.shape);
    s.bump = r.choice("bump", s.bump, {"gaussian", "box"});
    s.width = r.number("width", s.width, Range::positive());
    s.separation = r.number("separation", s.separation, Range::positive());
    if (s.kind == "grid_cat") s.branches = read_qubit(r.child("branches"), s.branches);
  } else if (s.kind == "momentum_cat") {
    s.shape = read_shape(r, {1, 1, 256, 20.0, 2});
    if (s.shape.particles != 1 || s.shape.dims != 1 || s.shape.spin_levels != 2) {
      r.issue("particles", "momentum_cat needs particles = 1, dims = 1, spin_levels = 2");
    }
    s.q = r.number("q", s.q, Range::positive());
    s.p0 = r.number("p0", s.p0);
    s.branches = read_qubit(r.child("branches"), s.branches);
  } else {
    s.shape = read_shape(r, {1, 2, 40, 8.0, 1});
    read_correlated(r, s.correlated);
  }
  return s;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  std::vector<ConfigIssue> issues;
  ExperimentConfig c;
  c.resolved = nlohmann::json::object();
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  ConfigReader top(&j, "", &issues, &c.resolved);
  if (!j.contains("experiment")) issues.push_back({"experiment", "missing required key"});
  c.experiment = top.choice("experiment", "toy", experiment_names());
  c.seed = top.unsigned64("seed", c.seed);
  c.output = top.string("output", c.output);
  c.format = top.choice("format", c.format, {"csv", "json"});
  for (const auto& name : experiment_names()) {
    if (name != c.experiment && j.contains(name)) {
      issues.push_back({name, "block for experiment '" + name + "' given but experiment is '" + c.experiment + "'"});
      top.raw(name);
    }
  }
  auto b = top.child(c.experiment);
  if (c.experiment == "toy") {
    auto& t = c.toy;
    t.params = read_toy_params(b);
    t.record_every = static_cast<int>(b.integer("record_every", t.record_every, Range::at_least(1)));
    t.integrator.method = method_from_string(
        b.choice("method", "implicit_midpoint", {"implicit_midpoint", "extended_phase_space", "rk4_reference"}));
    t.full_space = b.choice("representation", "reduced", {"reduced", "full"}) == "full";
    if (t.full_space && t.params.N > kMaxFullSpins) b.issue("N", "full representation limited to N <= 24");
  } else if (c.experiment == "sweep") {
    auto& s = c.sweep.spec;
    s.N_list = b.integers("N_list", s.N_list, Range::closed(2, 100000));
    s.w_list = b.numbers("w_list", s.w_list, Range::non_negative());
    s.trials = static_cast<int>(b.integer("trials", s.trials, Range::at_least(1)));
    auto base = b.child("base");
    s.base = read_toy_params(base);
    base.finish();
    s.seed = c.seed;
  } else if (c.experiment == "ensemble") {
    auto& s = c.ensemble.spec;
    auto list_or_scalar_int = [&](const std::string& one, const std::string& many, std::vector<int> def, Range r) {
      if (b.has(one) && b.has(many)) b.issue(one, "give either '" + one + "' or '" + many + "', not both");
      if (b.has(one)) return std::vector<int>{static_cast<int>(b.integer(one, 1, r))};
      return b.integers(many, std::move(def), r);
    };
    auto list_or_scalar = [&](const std::string& one, const std::string& many, std::vector<double> def, Range r) {
      if (b.has(one) && b.has(many)) b.issue(one, "give either '" + one + "' or '" + many + "', not both");
      if (b.has(one)) return std::vector<double>{b.number(one, 0.0, r)};
      return b.numbers(many, std::move(def), r);
    };
    s.N_list = list_or_scalar_int("N", "N_list", s.N_list, Range::closed(1, 1000000));
    s.beta_grid = list_or_scalar("beta", "beta_grid", s.beta_grid, Range::non_negative());
    s.omega_list = list_or_scalar("omega", "omega_list", s.omega_list, Range::non_negative());
    s.sampler = sampler_from_string(b.choice("sampler", "auto", {"importance", "metropolis", "auto"}));
    s.n_samples = b.integer("n_samples", s.n_samples, Range::at_least(100));
    s.eps = b.number("eps", s.eps, Range::open(0.0, 1.0));
    s.step = b.number("step", s.step, Range::positive());
    s.seed = c.seed;
  } else if (c.experiment == "operators") {
    auto& o = c.operators;
    std::vector<std::string> names;
    for (auto k : o.candidates) names.emplace_back(to_string(k));
    if (const auto* x = b.raw("candidates")) {
      if (!x->is_array() || x->empty()) {
        b.issue("candidates", "must be a non-empty array of family names");
      } else {
        names.clear();
        o.candidates.clear();
        for (std::size_t i = 0; i < x->size(); ++i) {
          const auto& e = (*x)[i];
          try {
            o.candidates.push_back(family_kind_from_string(e.is_string() ? e.get<std::string>() : ""));
            names.push_back(e.get<std::string>());
          } catch (const DomainError&) {
            b.issue("candidates[" + std::to_string(i) + "]", "unknown family " + e.dump());
          }
        }
      }
    }
    b.record_json("candidates", names);
    auto st = b.child("state");
    o.shape = read_shape(st, o.shape);
    read_correlated(st, o.state);
    st.finish();
    o.particle = static_cast<int>(b.integer("particle", o.particle, Range::non_negative()));
    if (o.particle >= o.shape.particles) b.issue("particle", "no such particle in the test state");
    o.options.calibration_threshold =
        b.number("calibration_threshold", o.options.calibration_threshold, Range::positive());
    o.options.tolerance_factor = b.number("tolerance_factor", o.options.tolerance_factor, Range::positive());
    for (auto k : o.candidates) {
      try {
        require_compatible(o.shape, k);
      } catch (const ShapeError& e) {
        b.issue("candidates", e.what());
      }
    }
  } else if (c.experiment == "estimate") {
    auto& e = c.estimate;
    e.w = b.number("w", e.w, Range::positive());
    e.N = b.number("N", e.N, Range::positive());
    e.R = b.number("R", e.R, Range::positive());
    e.mode = b.choice("mode", "cat", {"cat", "product"}) == "cat" ? MacroMode::Cat : MacroMode::Product;
  } else if (c.experiment == "state") {
    c.state.recipe = read_state_recipe(b);
  }
  b.finish();
  top.finish();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

inline nlohmann::json parse_json_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("syntax error: ") + e.what());
  }
}

/// Applies "a.b.c=value" to a JSON document; value is parsed as JSON when
/// possible and taken as a string otherwise.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "empty key in override path");
    if (!cur->is_object()) throw ConfigError(path, "override path crosses a non-object value");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    if (!cur->contains(key)) (*cur)[key] = nlohmann::json::object();
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace wfe
