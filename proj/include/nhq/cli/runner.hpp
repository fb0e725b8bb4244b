#pragma once

// Command dispatch: RunConfig in, ResultTable out.

#include <string>
#include <vector>

#include "nhq/cli/config.hpp"
#include "nhq/cli/model.hpp"
#include "nhq/cli/table.hpp"
#include "nhq/dynamics.hpp"
#include "nhq/meanfield.hpp"
#include "nhq/spectral.hpp"

#ifndef NHQ_VERSION
#define NHQ_VERSION "dev"
#endif

namespace nhq::cli {

namespace detail {

inline std::vector<cplx> padded_amplitudes(const RunConfig& cfg, std::size_t modes) {
  std::vector<cplx> a = cfg.alphas;
  a.resize(modes, 0.0);
  return a;
}

inline CVector initial_vector(const RunConfig& cfg, const BuiltModel& m) {
  if (cfg.initial == "coherent") {
    const auto a = padded_amplitudes(cfg, m.modes);
    return coherent_product(a, m.cutoff);
  }
  return basis_vector(m.op.dim(), resolve_basis_state(m, cfg.initial));
}

inline void add_series(ResultTable& t, const ObservableSpec& o, const std::vector<cplx>& values) {
  if (o.real_valued) {
    std::vector<double> re;
    for (auto z : values) re.push_back(z.real());
    t.add_real(o.name, re);
  } else {
    t.add_complex(o.name, values);
  }
}

// Observable columns of a density or pure-state series.
inline void add_observables(ResultTable& t, const TimeSeries& ts, const std::vector<ObservableSpec>& specs,
                            bool normalized, const std::string& command) {
  std::vector<ObservableRequest> requests;
  for (const auto& o : specs)
    if (o.op) requests.push_back({o.name, *o.op});
  auto values = observables(ts, requests, normalized);
  for (const auto& o : specs) {
    if (o.op) {
      add_series(t, o, values.at(o.name));
      continue;
    }
    auto it = ts.observables.find(o.name);
    if (it == ts.observables.end())
      throw ValidationError("output.observables: '" + o.name + "' is not recorded by " + command);
    add_series(t, o, it->second);
  }
}

inline OperatorFamily family(const RunConfig& cfg) {
  const bool liouv = cfg.spectrum_of == "liouvillian";
  return [cfg, liouv](double x) {
    BuiltModel m = build_model(cfg.model, cfg.model_params, cfg.cutoff, cfg.sweep->param, x);
    return liouv ? liouvillian(*m.gksl) : m.op;
  };
}

inline std::string text_of(EPClass c) { return to_string(c); }

}  // namespace detail

inline ResultTable run(const RunConfig& cfg, unsigned threads = 1) {
  ResultTable t;
  t.note("tool", std::string("nhq ") + NHQ_VERSION);
  t.note("command", cfg.command);
  t.note("model", cfg.model);
  t.note("config_digest", config_digest(cfg));
  t.note("seed", std::to_string(cfg.seed));

  const BuiltModel m = build_model(cfg.model, cfg.model_params, cfg.cutoff);
  const std::string& cmd = cfg.command;

  if (cmd == "spectrum") {
    const Operator op = cfg.spectrum_of == "liouvillian" ? liouvillian(*m.gksl) : m.op;
    const Spectrum s = eigendecompose(op);
    const EPReport rep = ep_metrics(s);
    const PhasePoint phase = classify_pt_phase(op);
    const auto loc = localization_metrics(s);
    const std::size_t n = s.size();
    std::vector<double> index, ipr, com;
    for (std::size_t k = 0; k < n; ++k) {
      index.push_back(double(k));
      ipr.push_back(loc[k].ipr);
      com.push_back(loc[k].center_of_mass);
    }
    t.note("operator", cfg.spectrum_of);
    t.add_real("index", index);
    t.add_complex("eigenvalue", s.eigenvalues);
    t.add_real("ipr", ipr);
    t.add_real("center_of_mass", com);
    t.add_text("phase", std::vector<std::string>(n, to_string(phase.phase)));
    t.add_text("classification", std::vector<std::string>(n, to_string(rep.classification)));
    t.add_real("max_pair_overlap", std::vector<double>(n, rep.max_pair_overlap));
    t.add_real("min_eigenvalue_gap", std::vector<double>(n, rep.min_eigenvalue_gap));
    t.add_real("vector_condition", std::vector<double>(n, rep.vector_condition));
    return t;
  }

  if (cmd == "sweep") {
    const auto grid = cfg.sweep->points();
    const auto pts = pt_sweep(detail::family(cfg), grid);
    std::vector<std::string> phase, cls;
    std::vector<double> overlap, gap, cond;
    for (const auto& p : pts) {
      phase.push_back(to_string(p.phase));
      cls.push_back(to_string(p.ep_report.classification));
      overlap.push_back(p.ep_report.max_pair_overlap);
      gap.push_back(p.ep_report.min_eigenvalue_gap);
      cond.push_back(p.ep_report.vector_condition);
    }
    t.add_real(cfg.sweep->param, grid);
    t.add_text("phase", phase);
    t.add_text("classification", cls);
    t.add_real("max_pair_overlap", overlap);
    t.add_real("min_eigenvalue_gap", gap);
    t.add_real("vector_condition", cond);
    const std::size_t n = pts.front().eigenvalues.size();
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<cplx> lam;
      for (const auto& p : pts) lam.push_back(p.eigenvalues[k]);
      t.add_complex("lambda_" + std::to_string(k), lam);
    }
    return t;
  }

  if (cmd == "locate-ep") {
    const auto& sw = *cfg.sweep;
    auto fam = detail::family(cfg);
    const double x = locate_ep(fam, sw.lo, sw.hi, sw.n_points);
    const EPReport rep = ep_metrics(eigendecompose(fam(x)));
    t.add_real(sw.param, {x});
    t.add_real("min_eigenvalue_gap", {rep.min_eigenvalue_gap});
    t.add_real("max_pair_overlap", {rep.max_pair_overlap});
    t.add_text("classification", {to_string(rep.classification)});
    return t;
  }

  const auto times = cfg.grid->points();

  if (cmd == "evolve-lindblad") {
    const CVector psi = detail::initial_vector(cfg, m);
    const LindbladMethod method = cfg.method == "exact" ? LindbladMethod::exact
                                  : cfg.method == "rk4" ? LindbladMethod::rk4
                                                        : LindbladMethod::automatic;
    const TimeSeries ts = evolve_lindblad(*m.gksl, Operator::outer(psi, psi), times, method, cfg.dt_max);
    t.add_real("t", ts.times);
    detail::add_observables(t, ts, resolve_observables(m, cfg.observables), true, cmd);
    return t;
  }

  if (cmd == "evolve-nh") {
    const TimeSeries ts = evolve_nh_state(m.op, detail::initial_vector(cfg, m), times, cfg.renormalize);
    t.note("renormalize", cfg.renormalize ? "true" : "false");
    t.add_real("t", ts.times);
    detail::add_observables(t, ts, resolve_observables(m, cfg.observables), cfg.renormalize, cmd);
    return t;
  }

  if (cmd == "trajectories") {
    TrajectoryOptions opt;
    opt.trajectories = cfg.trajectories;
    opt.seed = cfg.seed;
    opt.dt_max = cfg.dt_max;
    opt.threads = threads;
    const EnsembleResult r = run_trajectories(*m.gksl, detail::initial_vector(cfg, m), times, opt);
    std::size_t jumps = 0;
    for (auto j : r.jump_counts) jumps += j;
    t.note("trajectories", std::to_string(r.trajectory_count));
    t.note("total_jumps", std::to_string(jumps));
    t.add_real("t", r.mean_density.times);
    detail::add_observables(t, r.mean_density, resolve_observables(m, cfg.observables), true, cmd);
    t.add_real("stderr", r.stderr_estimate);
    return t;
  }

  const MeanFieldSystem& sys = *m.meanfield;
  const auto alphas = detail::padded_amplitudes(cfg, sys.modes());

  if (cmd == "meanfield") {
    const TimeSeries ts = evolve_meanfield(sys, CVector(alphas.begin(), alphas.end()), times);
    t.add_real("t", ts.times);
    std::vector<std::string> names = cfg.observables;
    if (names.empty()) {
      for (std::size_t k = 0; k < sys.modes(); ++k) names.push_back(amplitude_name(k));
      names.push_back("norm_sq");
    }
    for (const auto& n : names) {
      if (n == "norm_sq") detail::add_series(t, {n, std::nullopt, true}, ts.observables.at(n));
      else t.add_complex(n, ts.observables.at(n));
    }
    return t;
  }

  if (cmd == "crossvalidate") {
    const std::size_t cutoff = cfg.cutoff ? *cfg.cutoff : m.cutoff;
    const CrossValidation r = crossvalidate(sys, cutoff, CVector(alphas.begin(), alphas.end()), times);
    t.note("cutoff", std::to_string(cutoff));
    t.note("truncation_leakage", format_number(r.truncation_leakage));
    for (std::size_t k = 0; k < sys.modes(); ++k)
      t.note("max_abs_error." + amplitude_name(k), format_number(r.max_abs_error[k]));
    t.add_real("t", r.meanfield.times);
    for (std::size_t k = 0; k < sys.modes(); ++k) {
      const auto& mf = r.meanfield.observables.at(amplitude_name(k));
      const auto& q = r.quantum_amplitudes[k];
      std::vector<double> err;
      for (std::size_t i = 0; i < q.size(); ++i) err.push_back(std::abs(q[i] - mf[i]));
      t.add_complex(amplitude_name(k), mf);
      t.add_complex("quantum_" + amplitude_name(k), q);
      t.add_real("abs_error_" + std::to_string(k), err);
    }
    return t;
  }

  throw ValidationError("unknown command '" + cmd + "'");
}

// Exit status for a library error: 1 for configuration problems, 2 for
// runtime and numerical failures.
inline int exit_code(const Error& e) {
  const std::string n = e.name();
  if (n == "ParseError" || n == "ValidationError" || n == "InvalidArgument" || n == "ShapeMismatch" ||
      n == "DimensionOverflow")
    return 1;
  return 2;
}

}  // namespace nhq::cli
