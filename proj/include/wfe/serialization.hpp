#pragma once

// Versioned JSON text format for states:
//   {"format": "wfe-state", "version": 1, "type": "spin" | "symmetric" | "grid",
//    ...shape fields..., "amplitudes": [[re, im], ...]}

#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"
#include "wfe/grid_state.hpp"
#include "wfe/spin_state.hpp"

namespace wfe {

inline constexpr int kStateFormatVersion = 1;

using AnyState = std::variant<SpinState, SymmetricState, GridState>;

inline nlohmann::json amplitudes_json(std::span<const cplx> a) {
  auto arr = nlohmann::json::array();
  for (const auto& z : a) arr.push_back({z.real(), z.imag()});
  return arr;
}

inline nlohmann::json to_json(const SpinState& s) {
  return {{"format", "wfe-state"},
          {"version", kStateFormatVersion},
          {"type", "spin"},
          {"n_spins", s.n_spins()},
          {"amplitudes", amplitudes_json(s.amplitudes())}};
}

inline nlohmann::json to_json(const SymmetricState& s) {
  return {{"format", "wfe-state"},
          {"version", kStateFormatVersion},
          {"type", "symmetric"},
          {"n_spins", s.n_spins()},
          {"amplitudes", amplitudes_json(s.amplitudes())}};
}

inline nlohmann::json to_json(const GridState& s) {
  const auto& g = s.shape();
  nlohmann::json j = {{"format", "wfe-state"},
                      {"version", kStateFormatVersion},
                      {"type", "grid"},
                      {"particles", g.particles},
                      {"dims", g.dims},
                      {"points", g.points},
                      {"half_width", g.half_width},
                      {"spin_levels", g.spin_levels},
                      {"amplitudes", amplitudes_json(s.amplitudes())}};
  if (!s.warnings().empty()) j["warnings"] = s.warnings();
  return j;
}

inline nlohmann::json to_json(const AnyState& s) {
  return std::visit([](const auto& v) { return to_json(v); }, s);
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw DomainError(std::string("state JSON lacks field '") + key + "'");
  return j.at(key);
}

template <class T>
T typed(const nlohmann::json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::type_error&) {
    throw DomainError(std::string("state JSON field '") + key + "' has the wrong type");
  }
}

inline Amplitudes read_amplitudes(const nlohmann::json& j) {
  const auto& arr = field(j, "amplitudes");
  if (!arr.is_array()) throw DomainError("'amplitudes' must be an array of [re, im] pairs");
  Amplitudes a;
  a.reserve(arr.size());
  for (const auto& z : arr) {
    if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number()) {
      throw DomainError("'amplitudes' entries must be [re, im] number pairs");
    }
    a.emplace_back(z[0].get<double>(), z[1].get<double>());
  }
  return a;
}

}  // namespace detail

inline AnyState state_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("state JSON must be an object");
  if (detail::typed<std::string>(j, "format") != "wfe-state") throw DomainError("not a wfe-state document");
  const int version = detail::typed<int>(j, "version");
  if (version != kStateFormatVersion) {
    throw DomainError("unsupported state format version " + std::to_string(version));
  }
  const auto type = detail::typed<std::string>(j, "type");
  auto amps = detail::read_amplitudes(j);
  if (type == "spin") return SpinState(detail::typed<int>(j, "n_spins"), std::move(amps));
  if (type == "symmetric") return SymmetricState(detail::typed<int>(j, "n_spins"), std::move(amps));
  if (type == "grid") {
    GridShape g{detail::typed<int>(j, "particles"), detail::typed<int>(j, "dims"), detail::typed<int>(j, "points"),
                detail::typed<double>(j, "half_width"), detail::typed<int>(j, "spin_levels")};
    std::vector<std::string> warnings;
    if (j.contains("warnings")) warnings = j.at("warnings").get<std::vector<std::string>>();
    return GridState(g, std::move(amps), std::move(warnings));
  }
  throw DomainError("unknown state type '" + type + "'");
}

inline AnyState read_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(path + ": " + e.what());
  }
  return state_from_json(j);
}

inline void write_state(const std::string& path, const AnyState& s) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << to_json(s).dump() << '\n';
  if (!out) throw std::ios_base::failure("write failed for " + path);
}

inline StateSpace state_space(const AnyState& s) {
  return std::visit([](const auto& v) { return v.space(); }, s);
}

inline std::span<const cplx> state_amplitudes(const AnyState& s) {
  return std::visit([](const auto& v) { return v.amplitudes(); }, s);
}

}  // namespace wfe
