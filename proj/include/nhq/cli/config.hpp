#pragma once

// Validated run configuration and its digest.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nhq/cli/grammar.hpp"
#include "nhq/cli/model.hpp"

namespace nhq::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"spectrum",    "evolve-lindblad", "evolve-nh",
                                              "trajectories", "meanfield",      "crossvalidate",
                                              "sweep",        "locate-ep"};
  return names;
}

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"gainloss",       "passivept",    "nonreciprocal2",
                                              "twolevel",       "hatanonelson", "emitterchain",
                                              "collectivejump", "quadraticbosonic", "intracell"};
  return names;
}

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t n_points = 0;
  std::vector<double> points() const {
    std::vector<double> out(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
      out[k] = k + 1 == n_points ? t_end
                                 : t_start + (t_end - t_start) * double(k) / double(n_points - 1);
    return out;
  }
};

struct SweepGrid {
  std::string param;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_points = 0;
  std::vector<double> points() const {
    return TimeGrid{lo, hi, n_points}.points();
  }
};

struct RunConfig {
  std::string model;
  Section model_params;  // validated against the model vocabulary
  std::string command;
  std::optional<TimeGrid> grid;
  std::optional<SweepGrid> sweep;
  std::string method = "auto";
  std::size_t trajectories = 1000;
  std::uint64_t seed = 0;
  double dt_max = 0.01;
  std::optional<std::size_t> cutoff;
  bool renormalize = false;
  std::string initial;                  // state label, basis index, or "coherent"
  std::vector<cplx> alphas;             // coherent / mean-field amplitudes
  std::string spectrum_of = "heff";     // heff | liouvillian for GKSL models
  std::string output_path;
  std::string format = "csv";
  std::vector<std::string> observables;
  std::string canonical;  // normalized text used for the digest
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

// `command_override` is the CLI subcommand; it must agree with run.command
// when both are present.
inline RunConfig parse_config(const std::string& text, const std::string& command_override = "",
                              std::optional<std::uint64_t> seed_override = std::nullopt) {
  auto sections = parse_sections(text);
  RunConfig cfg;

  SectionReader model("model", sections["model"]);
  cfg.model = model.require_string("name");
  const ModelKeys& vocab = model_keys(cfg.model);
  for (const auto& [key, v] : model.raw()) {
    if (key == "name") continue;
    const bool allowed = std::find(vocab.keys.begin(), vocab.keys.end(), key) != vocab.keys.end() ||
                         (cfg.model == "quadraticbosonic" && coupling_indices(key));
    if (!allowed) throw ValidationError("unknown key " + detail::where("model." + key, v.line));
    cfg.model_params[key] = v;
  }

  SectionReader run("run", sections["run"]);
  auto cmd = run.string("command");
  if (cmd && !command_override.empty() && *cmd != command_override)
    throw ValidationError(run.where("command") + ": config requests '" + *cmd +
                          "' but the command line requests '" + command_override + "'");
  cfg.command = !command_override.empty() ? command_override : cmd.value_or("");
  if (cfg.command.empty()) throw ValidationError("missing required key run.command");
  const auto& cmds = command_names();
  if (std::find(cmds.begin(), cmds.end(), cfg.command) == cmds.end())
    throw ValidationError("unknown command '" + cfg.command + "'");

  const bool timed = cfg.command == "evolve-lindblad" || cfg.command == "evolve-nh" ||
                     cfg.command == "trajectories" || cfg.command == "meanfield" ||
                     cfg.command == "crossvalidate";
  const bool swept = cfg.command == "sweep" || cfg.command == "locate-ep";

  if (timed) {
    TimeGrid g;
    g.t_start = run.real("t_start", 0.0);
    g.t_end = run.require_real("t_end");
    g.n_points = run.require_count("n_points");
    if (g.n_points < 2) run.fail("n_points", "grids need at least 2 points");
    if (g.t_start < 0.0) run.fail("t_start", "must be >= 0");
    if (!(g.t_end > g.t_start)) run.fail("t_end", "must exceed t_start");
    cfg.grid = g;
  }
  if (swept) {
    SweepGrid s;
    s.param = run.require_string("param");
    s.lo = run.require_real("lo");
    s.hi = run.require_real("hi");
    s.n_points = run.require_count("n_points");
    if (s.n_points < (cfg.command == "locate-ep" ? 3u : 2u)) run.fail("n_points", "too few grid points");
    if (!(s.hi > s.lo)) run.fail("hi", "must exceed lo");
    if (s.param == "name" || !cfg.model_params.count(s.param) ||
        cfg.model_params[s.param].is_list)
      run.fail("param", "'" + s.param + "' is not a real-valued model parameter present in [model]");
    cfg.sweep = s;
  }

  if (cfg.command == "evolve-lindblad") {
    cfg.method = run.string("method", "auto");
    if (cfg.method != "auto" && cfg.method != "exact" && cfg.method != "rk4")
      run.fail("method", "expected auto, exact or rk4");
  }
  if (cfg.command == "evolve-lindblad" || cfg.command == "trajectories") {
    cfg.dt_max = run.real("dt_max", 0.01);
    if (!(cfg.dt_max > 0.0)) run.fail("dt_max", "must be positive");
    if (!vocab.gksl)
      throw ValidationError("command '" + cfg.command + "' needs a model with jump operators, not '" +
                            cfg.model + "'");
  }
  if (cfg.command == "trajectories") {
    cfg.trajectories = run.count("trajectories", 1000);
    if (cfg.trajectories < 2) run.fail("trajectories", "need at least 2 trajectories");
  }
  if (auto s = run.count("seed")) cfg.seed = *s;
  if (seed_override) cfg.seed = *seed_override;
  if (cfg.command == "evolve-nh") cfg.renormalize = run.boolean("renormalize").value_or(false);
  if (cfg.command == "crossvalidate" || cfg.command == "meanfield") {
    if (cfg.model != "gainloss" && cfg.model != "quadraticbosonic")
      throw ValidationError("command '" + cfg.command + "' supports the gainloss and quadraticbosonic models");
  }
  if (cfg.command == "crossvalidate") {
    if (auto c = run.count("cutoff")) cfg.cutoff = *c;
    if (!cfg.cutoff && !cfg.model_params.count("cutoff"))
      throw ValidationError("missing required key run.cutoff");
  }
  if (cfg.command == "spectrum" || swept) {
    cfg.spectrum_of = run.string("operator", "heff");
    if (cfg.spectrum_of != "heff" && cfg.spectrum_of != "liouvillian")
      run.fail("operator", "expected heff or liouvillian");
    if (cfg.spectrum_of == "liouvillian" && !vocab.gksl)
      run.fail("operator", "the Liouvillian needs a model with jump operators");
  }
  if (timed && cfg.command != "meanfield" && cfg.command != "crossvalidate")
    cfg.initial = run.string("initial", "");
  for (std::size_t k = 0;; ++k) {
    const std::string key = "alpha_" + std::to_string(k);
    if (!run.has(key)) break;
    cfg.alphas.push_back(*run.complex(key));
  }
  run.finish();

  SectionReader output("output", sections["output"]);
  cfg.output_path = output.string("path", "");
  cfg.format = output.string("format", "");
  if (!cfg.format.empty() && cfg.format != "csv" && cfg.format != "json")
    output.fail("format", "expected csv or json");
  if (auto obs = output.words("observables")) cfg.observables = *obs;
  output.finish();

  // Semantic checks that need the built model.
  const BuiltModel built = build_model(cfg.model, cfg.model_params, cfg.cutoff);
  const bool series_cmd = cfg.command == "evolve-lindblad" || cfg.command == "evolve-nh" ||
                          cfg.command == "trajectories";
  if (series_cmd) {
    if (!built.gksl && vocab.gksl)
      throw ValidationError("model.cutoff is required for command '" + cfg.command + "'");
    if (cfg.initial == "coherent") {
      if (built.modes == 0) throw ValidationError("run.initial: coherent states need a bosonic model");
      if (cfg.alphas.size() > built.modes) throw ValidationError("run.alpha_*: more amplitudes than modes");
    } else {
      resolve_basis_state(built, cfg.initial);
      if (!cfg.alphas.empty()) throw ValidationError("run.alpha_*: amplitudes need initial = coherent");
    }
    for (const auto& o : resolve_observables(built, cfg.observables))
      if (!o.op && cfg.command == "trajectories" && o.name != "trace" && o.name != "purity")
        throw ValidationError("output.observables: '" + o.name + "' is not recorded by " + cfg.command);
  } else if (cfg.command == "meanfield" || cfg.command == "crossvalidate") {
    if (cfg.alphas.size() > built.meanfield->modes())
      throw ValidationError("run.alpha_*: more amplitudes than modes");
    for (const auto& o : cfg.observables) {
      bool ok = o == "norm_sq";
      for (std::size_t k = 0; k < built.meanfield->modes(); ++k) ok = ok || o == "alpha_" + std::to_string(k);
      if (!ok || cfg.command == "crossvalidate")
        throw ValidationError("output.observables: '" + o + "' is not available for " + cfg.command);
    }
  } else {
    if (!built.gksl && vocab.gksl)
      throw ValidationError("model.cutoff is required for command '" + cfg.command + "'");
    if (!cfg.observables.empty())
      throw ValidationError("output.observables: not used by " + cfg.command);
    if (!cfg.alphas.empty()) throw ValidationError("run.alpha_*: not used by " + cfg.command);
  }

  // Digest input: every consumed key in sorted order plus effective overrides.
  std::ostringstream canon;
  canon << "command=" << cfg.command << "\nseed=" << cfg.seed << "\n";
  for (const auto& name : {"model", "run", "output"})
    for (const auto& [key, v] : sections[name])
      if (std::string(name) != "run" || (key != "seed" && key != "command"))
        canon << name << "." << key << "=" << v.text << "\n";
  cfg.canonical = canon.str();
  return cfg;
}

inline std::string config_digest(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(cfg.canonical)));
  return std::string("fnv1a64:") + buf;
}

}  // namespace nhq::cli
