#pragma once

// Runs one validated experiment: writes its tables plus manifest.json into the
// output directory and maps failures onto the exit-code contract.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "json.hpp"
#include "wfe/admissibility.hpp"
#include "wfe/config.hpp"
#include "wfe/ensembles.hpp"
#include "wfe/grid_model.hpp"
#include "wfe/serialization.hpp"
#include "wfe/toy_model.hpp"

namespace wfe {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

inline nlohmann::json build_versions() {
  return {{"wfe", kVersion},
          {"state_format", kStateFormatVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION}};
}

/// CSV text -> array of row objects; numeric cells become numbers.
inline nlohmann::json csv_to_json(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& l) {
    std::vector<std::string> v;
    std::string cell;
    std::istringstream s(l);
    while (std::getline(s, cell, ',')) v.push_back(cell);
    if (!l.empty() && l.back() == ',') v.emplace_back();
    return v;
  };
  auto rows = nlohmann::json::array();
  if (!std::getline(in, line)) return rows;
  header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) {
      const auto& c = cells[i];
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (!c.empty() && end == c.c_str() + c.size()) {
        row[header[i]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
      } else {
        row[header[i]] = c;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {
    std::filesystem::create_directories(dir_);
  }

  void text(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    f << content;
    f.close();
    if (!f) throw std::ios_base::failure("write failed for " + path.string());
    written_.push_back(name);
  }

  /// Writes `<stem>.csv` or `<stem>.json` according to the configured format.
  void table(const std::string& stem, const std::string& csv) {
    if (format_ == "json") {
      text(stem + ".json", csv_to_json(csv).dump(2) + "\n");
    } else {
      text(stem + ".csv", csv);
    }
  }

  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& written() const { return written_; }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string format_;
  std::vector<std::string> written_;
};

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  if (rec.reports.empty()) return "";
  std::string s = csv_header(rec.reports.front());
  for (const auto& r : rec.reports) s += csv_row(r);
  return s;
}

inline nlohmann::json stats_json(const TrajectoryMetadata& m) {
  return {{"method", m.method},
          {"dt", m.dt},
          {"T", m.T},
          {"record_every", m.record_every},
          {"substeps", m.stats.substeps},
          {"rate_bound", m.stats.rate_bound},
          {"max_iterations_used", m.stats.max_iterations_used},
          {"max_residual", m.stats.max_residual},
          {"steps", m.stats.steps}};
}

inline Orbital recipe_bump(const StateRecipe& r) {
  if (r.bump == "box") return box_orbital(0.0, r.width);
  return gaussian_orbital({0.0, 0.0}, r.width);
}

inline AnyState build_state(const StateRecipe& r, std::uint64_t seed) {
  if (r.kind == "spin_cat") {
    if (r.representation == "full") return build_spin_cat_full(r.N, r.branches);
    return build_spin_cat(r.N, r.branches, r.qubit);
  }
  if (r.kind == "spin_product") return build_spin_product(r.N, r.branches);
  if (r.kind == "initial_toy") {
    std::mt19937_64 rng(seed);
    return build_initial_toy(r.N, r.branches, {r.center, r.rho}, rng);
  }
  if (r.kind == "grid_cat") {
    return build_cat_state(r.shape, {recipe_bump(r), r.separation}, r.branches.alpha, r.branches.beta,
                           r.branches.gamma);
  }
  if (r.kind == "grid_mqp") return build_mqp_state(r.shape, {recipe_bump(r), r.separation});
  if (r.kind == "momentum_cat") return build_momentum_cat(r.shape, r.q, r.p0, r.branches.alpha, r.branches.beta,
                                                          r.branches.gamma);
  if (r.kind == "correlated_gaussian") return correlated_gaussian(r.shape, r.correlated);
  throw DomainError("unknown state kind " + r.kind);
}

/// Summary of a state's observables, as printed by `state inspect`.
inline nlohmann::json inspect_state(const AnyState& s) {
  nlohmann::json j;
  const auto space = state_space(s);
  const auto a = state_amplitudes(s);
  j["dim"] = a.size();
  j["norm"] = norm(space, a);
  j["finite"] = all_finite(a);
  if (const auto* sp = std::get_if<SpinState>(&s)) {
    j["type"] = "spin";
    j["n_spins"] = sp->n_spins();
    j["magnetization"] = magnetization(*sp);
    j["dispersion"] = dispersion(*sp, OperatorFamily::spins(0, sp->n_spins() - 1));
    if (sp->n_spins() >= 2) {
      j["readout_mean"] = readout_mean(readout_distribution(*sp));
      j["apparatus_asymmetry"] = apparatus_asymmetry(*sp);
    }
  } else if (const auto* sy = std::get_if<SymmetricState>(&s)) {
    j["type"] = "symmetric";
    j["n_spins"] = sy->n_spins();
    j["magnetization"] = magnetization(*sy);
    j["dispersion"] = dispersion(*sy, OperatorFamily::spins(0, sy->n_spins() - 1));
    const auto dist = readout_distribution(*sy);
    j["readout_mean"] = readout_mean(dist);
    if (sy->n_spins() >= 3) {
      const auto occ = well_occupations(*sy);
      j["p_left"] = occ.left;
      j["p_right"] = occ.right;
    }
  } else {
    const auto& g = std::get<GridState>(s);
    const auto& sh = g.shape();
    j["type"] = "grid";
    j["shape"] = {{"particles", sh.particles},
                  {"dims", sh.dims},
                  {"points", sh.points},
                  {"half_width", sh.half_width},
                  {"spin_levels", sh.spin_levels}};
    const auto cm = com_and_momentum(g);
    j["com"] = cm.com;
    j["momentum"] = cm.momentum;
    j["dispersion_x"] = dispersion(g, OperatorFamily::particles(FamilyKind::PositionX, sh.particles));
    if (sh.spin_levels == 2) j["magnetization"] = magnetization(g);
    if (!g.warnings().empty()) j["warnings"] = g.warnings();
  }
  return j;
}

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json manifest;
};

namespace detail {

inline nlohmann::json run_toy(const ExperimentConfig& c, OutputDir& out, nlohmann::json& manifest) {
  const auto& t = c.toy;
  const auto& p = t.params;
  p.validate();
  IntegratorOptions opt = t.integrator;
  const auto model = t.full_space ? toy_model_full(p) : toy_model(p);
  const auto start = toy_initial_state(p, c.seed);
  Amplitudes psi0;
  Observer observe;
  if (t.full_space) {
    const auto full = embed_symmetric(start).amplitudes();
    psi0.assign(full.begin(), full.end());
    observe = full_spin_observer(model, p.N, p.well_split());
  } else {
    psi0.assign(start.amplitudes().begin(), start.amplitudes().end());
    observe = symmetric_observer(model, p.N, p.well_split());
  }
  TrajectoryRecord rec;
  try {
    rec = evolve(psi0, model, p.T, p.dt, observe, t.record_every, opt);
  } catch (const EvolutionFailure& e) {
    out.table("trajectory", trajectory_csv(e.partial()));
    manifest["partial"] = true;
    manifest["integrator"] = stats_json(e.partial().metadata);
    throw;
  }
  out.table("trajectory", trajectory_csv(rec));
  const auto& last = rec.reports.back();
  if (t.full_space) {
    out.json("final_state.json", to_json(SpinState(p.N, rec.final_state)));
  } else {
    out.json("final_state.json", to_json(SymmetricState(p.N, rec.final_state)));
  }
  double max_wfe = 0.0;
  for (const auto& r : rec.reports) max_wfe = std::max(max_wfe, r.E_wfe);
  manifest["integrator"] = stats_json(rec.metadata);
  return {{"outcome", std::string(to_string(classify(last.p_left, last.p_right, p.thresholds)))},
          {"p_left", last.p_left},
          {"p_right", last.p_right},
          {"readout", last.readout},
          {"E_min", toy_ground_energy(p)},
          {"E_total_initial", rec.reports.front().E_total},
          {"max_E_wfe", max_wfe}};
}

inline nlohmann::json run_sweep(const ExperimentConfig& c, OutputDir& out) {
  const auto r = cat_sweep(c.sweep.spec);
  out.table("sweep", sweep_csv(r));
  out.table("sweep_summary", sweep_summary_csv(r));
  return {{"log_log_slope", std::isfinite(r.log_log_slope) ? nlohmann::json(r.log_log_slope) : nlohmann::json()}};
}

inline nlohmann::json run_ensemble(const ExperimentConfig& c, OutputDir& out) {
  const auto r = magnetization_curve(c.ensemble.spec);
  out.table("ensemble", curve_csv(r));
  out.table("crossings", crossing_csv(r));
  return {{"rows", r.rows.size()}};
}

inline nlohmann::json run_operators(const ExperimentConfig& c, OutputDir& out) {
  const auto& o = c.operators;
  const auto psi = correlated_gaussian(o.shape, o.state);
  auto provider = spectral_provider(o.shape);
  nlohmann::json reports = nlohmann::json::array();
  std::string csv = "candidate,check,value_re,value_im,scale,tolerance,pass\n";
  nlohmann::json verdicts = nlohmann::json::object();
  for (auto k : o.candidates) {
    OperatorSet set(provider, k);
    const auto rep = evaluate_candidate(set, psi.amplitudes(), o.particle, o.options);
    reports.push_back(to_json(rep));
    verdicts[std::string(to_string(k))] = rep.verdict ? "pass" : "fail";
    for (const auto& ch : rep.checks) {
      csv += std::string(to_string(k)) + "," + ch.name + "," + format_number(ch.value.real()) + "," +
             format_number(ch.value.imag()) + "," + format_number(ch.scale) + "," + format_number(ch.tolerance) +
             "," + (ch.pass ? "1" : "0") + "\n";
    }
  }
  out.json("constraints.json", {{"state", inspect_state(psi)}, {"reports", reports}});
  out.table("constraints", csv);
  return {{"verdicts", verdicts}};
}

inline nlohmann::json run_estimate(const ExperimentConfig& c, OutputDir& out) {
  const auto& e = c.estimate;
  const double v = macro_estimate(e.w, e.N, e.R, e.mode);
  const std::string mode = e.mode == MacroMode::Cat ? "cat" : "product";
  out.table("estimate", "w,N,R,mode,E_wfe\n" + format_number(e.w) + "," + format_number(e.N) + "," +
                            format_number(e.R) + "," + mode + "," + format_number(v) + "\n");
  return {{"E_wfe", v}};
}

inline nlohmann::json run_state(const ExperimentConfig& c, OutputDir& out) {
  const auto s = build_state(c.state.recipe, c.seed);
  out.json("state.json", to_json(s));
  return inspect_state(s);
}

}  // namespace detail

/// Executes the experiment and writes manifest.json last. Configuration
/// problems are the caller's business (parse_config throws before this).
inline RunResult run_experiment(const ExperimentConfig& c) {
  RunResult res;
  auto& m = res.manifest;
  m = {{"tool", "wfe"},
       {"experiment", c.experiment},
       {"seed", c.seed},
       {"config", c.resolved},
       {"versions", build_versions()},
       {"threads", thread_count()},
       {"partial", false}};
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<OutputDir> out;
  try {
    out = std::make_unique<OutputDir>(c.output, c.format);
  } catch (const std::exception& e) {
    res.exit_code = kExitIo;
    m["status"] = "io_error";
    m["error"] = e.what();
    return res;
  }
  try {
    nlohmann::json results;
    if (c.experiment == "toy") results = detail::run_toy(c, *out, m);
    else if (c.experiment == "sweep") results = detail::run_sweep(c, *out);
    else if (c.experiment == "ensemble") results = detail::run_ensemble(c, *out);
    else if (c.experiment == "operators") results = detail::run_operators(c, *out);
    else if (c.experiment == "estimate") results = detail::run_estimate(c, *out);
    else results = detail::run_state(c, *out);
    m["status"] = "ok";
    m["results"] = results;
  } catch (const NumericalFailure& e) {
    res.exit_code = kExitNumerical;
    m["status"] = "numerical_failure";
    m["error"] = e.what();
  } catch (const CalibrationFailure& e) {
    res.exit_code = kExitNumerical;
    m["status"] = "numerical_failure";
    m["error"] = e.what();
  } catch (const std::ios_base::failure& e) {
    res.exit_code = kExitIo;
    m["status"] = "io_error";
    m["error"] = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    res.exit_code = kExitIo;
    m["status"] = "io_error";
    m["error"] = e.what();
  } catch (const std::invalid_argument& e) {
    // parameter combinations only detectable once objects are built
    res.exit_code = kExitConfig;
    m["status"] = "invalid_parameters";
    m["error"] = e.what();
  }
  m["outputs"] = out->written();
  if (res.exit_code != kExitOk && !out->written().empty()) m["partial"] = true;
  m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    out->json("manifest.json", m);
  } catch (const std::exception& e) {
    res.exit_code = kExitIo;
    m["status"] = "io_error";
    m["error"] = e.what();
  }
  return res;
}

}  // namespace wfe
