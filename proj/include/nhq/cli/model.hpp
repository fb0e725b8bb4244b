#pragma once

// Model vocabulary of the config files and its translation into library
// objects.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nhq/cli/grammar.hpp"
#include "nhq/dynamics.hpp"
#include "nhq/meanfield.hpp"
#include "nhq/models.hpp"
#include "nhq/spectral.hpp"

namespace nhq::cli {

struct ModelKeys {
  std::vector<std::string> keys;
  bool gksl = false;     // has jump operators
  bool bosonic = false;  // truncated Fock space
};

inline const ModelKeys& model_keys(const std::string& model) {
  static const std::map<std::string, ModelKeys> table{
      {"gainloss", {{"g", "gamma", "gamma_gain", "gamma_loss"}, false, false}},
      {"passivept", {{"g", "gamma1", "gamma2"}, false, false}},
      {"nonreciprocal2", {{"g1", "g2"}, false, false}},
      {"twolevel", {{"omega_e", "Gamma"}, true, false}},
      {"hatanonelson", {{"N", "J", "delta", "boundary"}, false, false}},
      {"emitterchain", {{"N", "Gamma", "boundary"}, false, false}},
      {"collectivejump", {{"J", "gamma", "phi", "cutoff"}, true, true}},
      {"quadraticbosonic", {{"modes", "cutoff", "loss", "gain"}, true, true}},
      {"intracell", {{"J", "gamma", "frame"}, false, false}},
  };
  auto it = table.find(model);
  if (it == table.end()) throw ValidationError("unknown model '" + model + "'");
  return it->second;
}

// coupling_<i>_<j>
inline std::optional<std::pair<std::size_t, std::size_t>> coupling_indices(const std::string& key) {
  if (key.rfind("coupling_", 0) != 0) return std::nullopt;
  const std::string rest = key.substr(9);
  const auto us = rest.find('_');
  if (us == std::string::npos || us == 0 || us + 1 == rest.size()) return std::nullopt;
  const std::string a = rest.substr(0, us), b = rest.substr(us + 1);
  auto digits = [](const std::string& s) {
    return s.size() < 6 && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  };
  if (!digits(a) || !digits(b)) return std::nullopt;
  return std::pair{std::stoul(a), std::stoul(b)};
}

struct BuiltModel {
  std::string name;
  Operator op = Operator(1);           // non-Hermitian Hamiltonian (H_eff for GKSL models)
  std::optional<LindbladModel> gksl;   // models with jump operators
  std::optional<MeanFieldSystem> meanfield;
  std::vector<std::string> labels;     // basis labels of op
  std::size_t modes = 0;               // bosonic models
  std::size_t cutoff = 0;
};

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// `fock_cutoff` replaces model.cutoff when set. `override_key` substitutes a
// swept parameter value.
inline BuiltModel build_model(const std::string& name, Section params,
                              std::optional<std::size_t> fock_cutoff = std::nullopt,
                              const std::string& override_key = "", double override_value = 0.0) {
  model_keys(name);
  if (!override_key.empty()) params[override_key].text = format_real(override_value);
  if (fock_cutoff) params["cutoff"].text = std::to_string(*fock_cutoff);
  SectionReader p("model", params);
  BuiltModel out;
  out.name = name;

  auto positive_count = [&](const std::string& key) {
    const auto n = p.require_count(key);
    if (n < 1) p.fail(key, "must be >= 1");
    return static_cast<std::size_t>(n);
  };
  auto boundary = [&] {
    const std::string b = p.string("boundary", "open");
    if (b != "open" && b != "periodic") p.fail("boundary", "expected open or periodic");
    return parse_boundary(b);
  };

  if (name == "gainloss") {
    const double g = p.require_real("g");
    auto gamma = p.real("gamma");
    auto gain = p.real("gamma_gain");
    auto loss = p.real("gamma_loss");
    if (gamma && (gain || loss))
      throw ValidationError(p.where("gamma") + ": give either gamma or gamma_gain/gamma_loss");
    if (!gamma && !(gain && loss))
      throw ValidationError("model.gainloss needs gamma or both gamma_gain and gamma_loss");
    const double gg = gamma ? *gamma : *gain, gl = gamma ? *gamma : *loss;
    out.op = gain_loss_dimer(g, gg, gl);
    // Mode 0 carries the gain, so the generator equals op.
    out.meanfield.emplace(Operator{{0.0, g}, {g, 0.0}}, std::vector<double>{0.0, 2.0 * gl},
                          std::vector<double>{2.0 * gg, 0.0});
  } else if (name == "passivept") {
    out.op = passive_pt_dimer(p.require_real("g"), p.require_real("gamma1"), p.require_real("gamma2"));
  } else if (name == "nonreciprocal2") {
    auto g1 = p.complex("g1"), g2 = p.complex("g2");
    if (!g1 || !g2) throw ValidationError("model.nonreciprocal2 needs g1 and g2");
    out.op = nonreciprocal_2x2(*g1, *g2);
  } else if (name == "twolevel") {
    out.gksl = two_level_decay(p.real("omega_e", 0.0), p.require_real("Gamma"));
  } else if (name == "hatanonelson") {
    out.op = hatano_nelson(positive_count("N"), p.require_real("J"), p.require_real("delta"), boundary());
  } else if (name == "emitterchain") {
    out.op = emitter_chain(positive_count("N"), p.require_real("Gamma"), boundary());
  } else if (name == "collectivejump") {
    out.modes = 2;
    out.cutoff = positive_count("cutoff");
    out.gksl = collective_jump_model(p.require_real("J"), p.require_real("gamma"), p.real("phi", 0.0),
                                     out.cutoff);
  } else if (name == "quadraticbosonic") {
    out.modes = positive_count("modes");
    std::vector<double> loss = p.reals("loss").value_or(std::vector<double>(out.modes, 0.0));
    std::vector<double> gain = p.reals("gain").value_or(std::vector<double>(out.modes, 0.0));
    if (loss.size() != out.modes) p.fail("loss", "needs one rate per mode");
    if (gain.size() != out.modes) p.fail("gain", "needs one rate per mode");
    Operator c(out.modes);
    std::vector<std::vector<bool>> set(out.modes, std::vector<bool>(out.modes, false));
    for (const auto& [key, v] : params) {
      auto ij = coupling_indices(key);
      if (!ij) continue;
      auto [i, j] = *ij;
      if (i >= out.modes || j >= out.modes) p.fail(key, "mode index out of range");
      const cplx x = *p.complex(key);
      c(i, j) = x;
      set[i][j] = true;
      if (!set[j][i]) c(j, i) = std::conj(x);
    }
    if (!is_hermitian(c, 1e-12))
      throw ValidationError("model.coupling_*: the coupling matrix must be Hermitian");
    out.meanfield.emplace(c, loss, gain);
    if (params.count("cutoff")) {
      out.cutoff = positive_count("cutoff");
      out.gksl = quadratic_bosonic_model(c, loss, gain, out.cutoff);
    }
  } else if (name == "intracell") {
    const std::string frame = p.string("frame", "site");
    if (frame != "site" && frame != "transformed") p.fail("frame", "expected site or transformed");
    const double j = p.require_real("J"), gamma = p.require_real("gamma");
    out.op = frame == "site" ? intracell_pair(j, gamma) : transformed_intracell(j, gamma);
    if (frame == "transformed") out.labels = {"A", "B"};
    else out.labels = {"a", "b"};
  }

  if (out.gksl) {
    out.op = effective_hamiltonian(*out.gksl);
    out.labels = out.gksl->labels();
  }
  if (out.labels.empty())
    for (std::size_t k = 0; k < out.op.dim(); ++k) out.labels.push_back(std::to_string(k));
  return out;
}

struct ObservableSpec {
  std::string name;
  std::optional<Operator> op;  // empty for series recorded by the evolver
  bool real_valued = true;
};

inline bool is_recorded_series(const std::string& name) {
  return name == "norm_sq" || name == "trace" || name == "purity" || name == "min_eigenvalue";
}

// rho_<a><b> is <a|rho|b> for basis labels a, b; a_<i> and n_<i> are the
// annihilation and number operators of bosonic mode i.
inline ObservableSpec resolve_observable(const BuiltModel& m, const std::string& name) {
  if (is_recorded_series(name)) return {name, std::nullopt, true};
  const std::size_t dim = m.op.dim();
  if (name.rfind("rho_", 0) == 0) {
    const std::string rest = name.substr(4);
    for (std::size_t a = 0; a < m.labels.size(); ++a) {
      const std::string& la = m.labels[a];
      if (rest.rfind(la, 0) != 0) continue;
      for (std::size_t b = 0; b < m.labels.size(); ++b) {
        if (rest.size() != la.size() + m.labels[b].size() || rest.substr(la.size()) != m.labels[b]) continue;
        return {name, Operator::outer(basis_vector(dim, b), basis_vector(dim, a)), a == b};
      }
    }
  }
  if (m.modes > 0 && (name.rfind("a_", 0) == 0 || name.rfind("n_", 0) == 0)) {
    const std::string idx = name.substr(2);
    if (!idx.empty() && idx.size() < 6 &&
        std::all_of(idx.begin(), idx.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const std::size_t mode = std::stoul(idx);
      if (mode < m.modes) {
        const Operator a = embed(boson_ladder(m.cutoff), mode, m.modes, m.cutoff);
        if (name[0] == 'a') return {name, a, false};
        return {name, a.adjoint() * a, true};
      }
    }
  }
  throw ValidationError("output.observables: '" + name + "' is not defined for model " + m.name);
}

inline std::vector<ObservableSpec> resolve_observables(const BuiltModel& m,
                                                       const std::vector<std::string>& names) {
  std::vector<ObservableSpec> out;
  if (names.empty()) {
    if (m.modes > 0) {
      for (std::size_t k = 0; k < m.modes; ++k) out.push_back(resolve_observable(m, "a_" + std::to_string(k)));
      for (std::size_t k = 0; k < m.modes; ++k) out.push_back(resolve_observable(m, "n_" + std::to_string(k)));
    } else {
      for (const auto& l : m.labels) out.push_back(resolve_observable(m, "rho_" + l + l));
    }
    return out;
  }
  for (const auto& n : names) out.push_back(resolve_observable(m, n));
  return out;
}

// Basis index named by a label or a plain index.
inline std::size_t resolve_basis_state(const BuiltModel& m, const std::string& token) {
  if (token.empty()) return 0;
  for (std::size_t k = 0; k < m.labels.size(); ++k)
    if (m.labels[k] == token) return k;
  if (std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
      token.size() < 10) {
    const std::size_t k = std::stoul(token);
    if (k < m.op.dim()) return k;
  }
  throw ValidationError("run.initial: '" + token + "' is neither a basis label nor an index below " +
                        std::to_string(m.op.dim()));
}

}  // namespace nhq::cli
