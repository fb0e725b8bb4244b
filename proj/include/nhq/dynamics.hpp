#pragma once

// Time evolution: exact or RK4 GKSL propagation, no-jump evolution under an
// effective non-Hermitian Hamiltonian, and the stochastic jump unraveling
// whose ensemble mean reproduces the GKSL density matrix.

#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nhq/models.hpp"
#include "nhq/numkernel.hpp"
#include "nhq/rng.hpp"
#include "nhq/spectral.hpp"

namespace nhq {

enum class PayloadKind { density, pure_state, meanfield };

inline const char* to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::density: return "density";
    case PayloadKind::pure_state: return "pure_state";
    case PayloadKind::meanfield: return "meanfield";
  }
  return "?";
}

struct TimeSeries {
  std::vector<double> times;
  PayloadKind payload_kind = PayloadKind::density;
  std::vector<Operator> densities;  // payload_kind == density
  std::vector<CVector> vectors;     // pure_state and meanfield payloads
  // Derived series recorded by the evolvers ("trace", "purity", "norm_sq",
  // "min_eigenvalue"); real-valued quantities have zero imaginary part.
  std::map<std::string, std::vector<cplx>> observables;

  std::size_t size() const { return times.size(); }
};

// Positivity noise floor for density eigenvalues, and the hard failure
// threshold for an evolution run.
inline constexpr double kPositivityTol = 1e-8;
inline constexpr double kPositivityFailure = 1e-6;
inline constexpr double kNormOverflow = 1e150;

namespace detail {

inline void check_times(std::span<const double> times) {
  if (times.empty()) throw InvalidArgument("time grid is empty");
  if (!(times.front() >= 0.0)) throw InvalidArgument("time grid must start at t >= 0");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k])) throw InvalidArgument("time grid has a non-finite entry");
    if (k > 0 && times[k] < times[k - 1]) throw InvalidArgument("time grid must be sorted");
  }
}

inline double min_hermitian_eigenvalue(const Operator& rho) {
  const CVector l = eigenvalues(hermitian_part(rho));
  double m = l.front().real();
  for (auto z : l) m = std::min(m, z.real());
  return m;
}

inline void check_density(const Operator& rho) {
  const double herm = (rho - rho.adjoint()).frobenius_norm();
  if (herm > 1e-10) throw InvalidArgument("initial density matrix is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > 1e-10)
    throw InvalidArgument("initial density matrix does not have unit trace");
  if (min_hermitian_eigenvalue(rho) < -1e-10)
    throw InvalidArgument("initial density matrix is not positive semidefinite");
}

inline void record_density(TimeSeries& ts, double t, Operator rho, bool check_positive) {
  const double purity = (rho * rho).trace().real();
  const double min_eig = min_hermitian_eigenvalue(rho);
  if (check_positive && min_eig < -kPositivityFailure)
    throw PositivityViolation("density eigenvalue " + std::to_string(min_eig) +
                              " at t = " + std::to_string(t));
  ts.times.push_back(t);
  ts.observables["trace"].push_back(rho.trace());
  ts.observables["purity"].push_back(purity);
  ts.observables["min_eigenvalue"].push_back(min_eig);
  ts.densities.push_back(std::move(rho));
}

// Caches exp(dt * generator) for the most recent dt. Grid spacings that
// agree to 1e-12 relative reuse the cached propagator.
class PropagatorCache {
 public:
  explicit PropagatorCache(Operator generator) : generator_(std::move(generator)) {}
  const Operator& get(double dt) {
    if (!cached_ || std::abs(dt - dt_) > 1e-12 * std::max(1.0, std::abs(dt_))) {
      try {
        cached_.emplace(propagator(generator_, dt));
      } catch (const NonFinite&) {
        throw Overflow("propagator over dt = " + std::to_string(dt) + " overflows double range");
      }
      dt_ = dt;
    }
    return *cached_;
  }

 private:
  Operator generator_;
  std::optional<Operator> cached_;
  double dt_ = 0.0;
};

}  // namespace detail

// Column-stacked GKSL generator: vec(d rho/dt) = L vec(rho).
inline Operator liouvillian(const LindbladModel& m, std::size_t cap = kDefaultDimensionCap) {
  const std::size_t n = m.dim();
  if (n > cap / n)
    throw DimensionOverflow("liouvillian dimension " + std::to_string(n * n) +
                            " exceeds cap " + std::to_string(cap));
  const Operator id = Operator::identity(n);
  const Operator& h = m.hamiltonian();
  Operator l = (kronecker(id, h, cap) - kronecker(h.transpose(), id, cap)) * cplx(0, -1);
  for (const auto& j : m.jumps()) {
    const Operator ldl = j.op.adjoint() * j.op;
    Operator d = kronecker(j.op.conjugate(), j.op, cap) -
                 kronecker(id, ldl, cap) * cplx(0.5) -
                 kronecker(ldl.transpose(), id, cap) * cplx(0.5);
    l += d * cplx(j.rate);
  }
  return l;
}

// Right-hand side of the master equation in matrix form.
inline Operator lindblad_rhs(const LindbladModel& m, const Operator& heff, const Operator& rho) {
  Operator out = (heff * rho - rho * heff.adjoint()) * cplx(0, -1);
  for (const auto& j : m.jumps()) out += (j.op * rho * j.op.adjoint()) * cplx(j.rate);
  return out;
}

enum class LindbladMethod { automatic, exact, rk4 };

// Exact propagation is used automatically while dim^2 stays at or below this.
inline constexpr std::size_t kExactLiouvillianMax = 4096;

inline TimeSeries evolve_lindblad(const LindbladModel& m, const Operator& rho0,
                                  std::span<const double> times,
                                  LindbladMethod method = LindbladMethod::automatic,
                                  double dt_max = 0.01,
                                  std::size_t cap = kDefaultDimensionCap) {
  if (rho0.dim() != m.dim()) throw ShapeMismatch("evolve_lindblad: initial state dimension");
  detail::check_times(times);
  detail::check_density(rho0);
  const std::size_t n = m.dim();
  if (method == LindbladMethod::automatic)
    method = n * n <= kExactLiouvillianMax ? LindbladMethod::exact : LindbladMethod::rk4;

  TimeSeries ts;
  ts.payload_kind = PayloadKind::density;
  double t_prev = 0.0;

  if (method == LindbladMethod::exact) {
    const Operator l = liouvillian(m, cap);
    detail::PropagatorCache cache(l);
    CVector v = vectorize(rho0);
    for (double t : times) {
      if (t > t_prev) v = cache.get(t - t_prev) * v;
      t_prev = t;
      detail::record_density(ts, t, devectorize(v, n), true);
    }
    return ts;
  }

  if (!(dt_max > 0.0)) throw InvalidArgument("evolve_lindblad: dt_max must be positive");
  const Operator heff = effective_hamiltonian(m);
  Operator rho = rho0;
  for (double t : times) {
    const double span = t - t_prev;
    if (span > 0.0) {
      const double h_target = std::min(dt_max, span / 10.0);
      const auto steps = static_cast<std::size_t>(std::ceil(span / h_target - 1e-9));
      const double h = span / double(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        const Operator k1 = lindblad_rhs(m, heff, rho);
        const Operator k2 = lindblad_rhs(m, heff, rho + k1 * cplx(0.5 * h));
        const Operator k3 = lindblad_rhs(m, heff, rho + k2 * cplx(0.5 * h));
        const Operator k4 = lindblad_rhs(m, heff, rho + k3 * cplx(h));
        rho += (k1 + k2 * cplx(2.0) + k3 * cplx(2.0) + k4) * cplx(h / 6.0);
      }
    }
    t_prev = t;
    detail::record_density(ts, t, rho, true);
  }
  return ts;
}

// psi(t) = exp(-i H t) psi0 on the grid. "norm_sq" always records the raw
// squared norm; renormalize only affects the stored states.
inline TimeSeries evolve_nh_state(const Operator& h, const CVector& psi0,
                                  std::span<const double> times, bool renormalize = false) {
  if (psi0.size() != h.dim()) throw ShapeMismatch("evolve_nh_state: state length");
  if (norm(psi0) == 0.0) throw InvalidArgument("evolve_nh_state: zero initial state");
  detail::check_times(times);
  const Operator gen = h * cplx(0, -1);
  detail::PropagatorCache cache(gen);
  TimeSeries ts;
  ts.payload_kind = PayloadKind::pure_state;
  CVector psi = psi0;
  double t_prev = 0.0;
  for (double t : times) {
    if (t > t_prev) psi = cache.get(t - t_prev) * psi;
    t_prev = t;
    const double nrm = norm(psi);
    if (!(nrm <= kNormOverflow))
      throw Overflow("evolve_nh_state: norm exceeds 1e150 at t = " + std::to_string(t));
    ts.times.push_back(t);
    ts.observables["norm_sq"].push_back(nrm * nrm);
    ts.vectors.push_back(renormalize && nrm > 0 ? normalized(psi) : psi);
  }
  return ts;
}

// rho(t) = E rho0 E^dag with E = exp(-i H t); the trace is not restored.
inline TimeSeries evolve_nh_density(const Operator& h, const Operator& rho0,
                                    std::span<const double> times) {
  if (rho0.dim() != h.dim()) throw ShapeMismatch("evolve_nh_density: state dimension");
  if ((rho0 - rho0.adjoint()).frobenius_norm() > 1e-10)
    throw InvalidArgument("evolve_nh_density: initial state is not Hermitian");
  if (detail::min_hermitian_eigenvalue(rho0) < -1e-10)
    throw InvalidArgument("evolve_nh_density: initial state is not positive semidefinite");
  detail::check_times(times);
  const Operator gen = h * cplx(0, -1);
  detail::PropagatorCache cache(gen);
  TimeSeries ts;
  ts.payload_kind = PayloadKind::density;
  Operator rho = rho0;
  double t_prev = 0.0;
  for (double t : times) {
    if (t > t_prev) {
      const Operator& u = cache.get(t - t_prev);
      rho = u * rho * u.adjoint();
    }
    t_prev = t;
    const double tr = rho.trace().real();
    if (!(std::abs(tr) <= kNormOverflow))
      throw Overflow("evolve_nh_density: trace exceeds 1e150 at t = " + std::to_string(t));
    detail::record_density(ts, t, rho, false);
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Quantum-jump unraveling

struct TrajectoryOptions {
  std::size_t trajectories = 1000;
  std::uint64_t seed = 0;
  double dt_max = 0.01;
  unsigned threads = 1;
};

struct EnsembleResult {
  TimeSeries mean_density;
  std::size_t trajectory_count = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> jump_counts;
  std::vector<double> stderr_estimate;  // RMS Frobenius error of the mean
};

// Per-step jump probability above which a step is split, and above which
// the run is rejected.
inline constexpr double kJumpProbabilitySplit = 0.1;
inline constexpr double kJumpProbabilityMax = 0.5;

namespace detail {

class TrajectoryStepper {
 public:
  TrajectoryStepper(const LindbladModel& m, const Operator& heff)
      : model_(m), gen_(heff * cplx(0, -1)) {}

  // Advances psi (unit norm) by h; returns number of jumps applied.
  std::size_t advance(CVector& psi, double h, RandomStream& rng) {
    const double dp = h * jump_rate(psi);
    if (dp > kJumpProbabilityMax)
      throw StepTooLarge("one-step jump probability " + std::to_string(dp) +
                         " exceeds 0.5; reduce dt_max");
    if (dp <= kJumpProbabilitySplit) return single_step(psi, h, rng);
    const auto pieces = static_cast<std::size_t>(std::ceil(dp / kJumpProbabilitySplit));
    std::size_t jumps = 0;
    for (std::size_t k = 0; k < pieces; ++k) jumps += single_step(psi, h / double(pieces), rng);
    return jumps;
  }

 private:
  double jump_rate(const CVector& psi) {
    weights_.clear();
    double total = 0.0;
    for (const auto& j : model_.jumps()) {
      const CVector lpsi = j.op * psi;
      const double w = j.rate * std::pow(norm(lpsi), 2);
      weights_.push_back(w);
      total += w;
    }
    return total;
  }

  std::size_t single_step(CVector& psi, double h, RandomStream& rng) {
    const double total = jump_rate(psi);
    const double dp = h * total;
    if (dp > kJumpProbabilityMax)
      throw StepTooLarge("one-step jump probability " + std::to_string(dp) +
                         " exceeds 0.5; reduce dt_max");
    if (rng.uniform() < dp) {
      double r = rng.uniform() * total;
      std::size_t pick = 0;
      while (pick + 1 < weights_.size() && r >= weights_[pick]) r -= weights_[pick++];
      psi = normalized(model_.jumps()[pick].op * psi);
      return 1;
    }
    psi = normalized(propagator_for(h) * psi);
    return 0;
  }

  const Operator& propagator_for(double h) {
    for (const auto& [dt, u] : cache_)
      if (dt == h) return u;
    cache_.emplace_back(h, propagator(gen_, h));
    return cache_.back().second;
  }

  const LindbladModel& model_;
  Operator gen_;
  std::vector<double> weights_;
  std::vector<std::pair<double, Operator>> cache_;
};

}  // namespace detail

inline EnsembleResult run_trajectories(const LindbladModel& m, const CVector& psi0,
                                       std::span<const double> times,
                                       const TrajectoryOptions& opt) {
  const std::size_t n = m.dim();
  if (psi0.size() != n) throw ShapeMismatch("run_trajectories: state length");
  if (std::abs(norm(psi0) - 1.0) > 1e-10)
    throw InvalidArgument("run_trajectories: initial state must have unit norm");
  if (opt.trajectories < 1) throw InvalidArgument("run_trajectories: need >= 1 trajectory");
  if (!(opt.dt_max > 0.0)) throw InvalidArgument("run_trajectories: dt_max must be positive");
  detail::check_times(times);

  const Operator heff = effective_hamiltonian(m);
  const std::size_t nt = times.size();
  const unsigned threads = std::max(1u, opt.threads);

  // Per grid interval: number of base steps and their length.
  std::vector<std::pair<std::size_t, double>> plan(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const double span = times[k] - (k == 0 ? 0.0 : times[k - 1]);
    if (span <= 0.0) {
      plan[k] = {0, 0.0};
      continue;
    }
    const auto steps = static_cast<std::size_t>(std::ceil(span / opt.dt_max - 1e-9));
    plan[k] = {steps, span / double(steps)};
  }

  std::vector<std::vector<cplx>> accum(nt, std::vector<cplx>(n * n));
  EnsembleResult res;
  res.trajectory_count = opt.trajectories;
  res.seed = opt.seed;
  res.jump_counts.assign(opt.trajectories, 0);

  // Trajectories are simulated in chunks; within a chunk each worker owns a
  // fixed residue class, and the chunk is reduced in index order.
  const std::size_t chunk = 32 * std::size_t{threads};
  std::vector<std::vector<CVector>> states(chunk, std::vector<CVector>(nt));
  std::vector<std::exception_ptr> failures(chunk);

  auto simulate = [&](std::size_t traj, std::size_t slot) {
    try {
      detail::TrajectoryStepper stepper(m, heff);
      RandomStream rng(opt.seed, traj);
      CVector psi = psi0;
      std::size_t jumps = 0;
      for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t s = 0; s < plan[k].first; ++s) jumps += stepper.advance(psi, plan[k].second, rng);
        states[slot][k] = psi;
      }
      res.jump_counts[traj] = jumps;
    } catch (...) {
      failures[slot] = std::current_exception();
    }
  };

  for (std::size_t base = 0; base < opt.trajectories; base += chunk) {
    const std::size_t count = std::min(chunk, opt.trajectories - base);
    std::fill(failures.begin(), failures.end(), nullptr);
    if (threads == 1) {
      for (std::size_t s = 0; s < count; ++s) simulate(base + s, s);
    } else {
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t s = w; s < count; s += threads) simulate(base + s, s);
        });
      for (auto& th : pool) th.join();
    }
    for (std::size_t s = 0; s < count; ++s)
      if (failures[s]) std::rethrow_exception(failures[s]);
    for (std::size_t s = 0; s < count; ++s)
      for (std::size_t k = 0; k < nt; ++k) {
        const CVector& psi = states[s][k];
        auto& acc = accum[k];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += detail::mul(psi[i], std::conj(psi[j]));
      }
  }

  const double inv_m = 1.0 / double(opt.trajectories);
  res.mean_density.payload_kind = PayloadKind::density;
  for (std::size_t k = 0; k < nt; ++k) {
    for (auto& z : accum[k]) z *= inv_m;
    Operator rho(n, std::move(accum[k]));
    const double fro2 = std::pow(rho.frobenius_norm(), 2);
    res.stderr_estimate.push_back(
        opt.trajectories > 1 ? std::sqrt(std::max(0.0, 1.0 - fro2) / double(opt.trajectories - 1)) : 0.0);
    detail::record_density(res.mean_density, times[k], std::move(rho), false);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Observables

struct ObservableRequest {
  std::string name;
  Operator op;
};

// trace(A rho) for density payloads; <psi|A|psi>/<psi|psi> for vector
// payloads (or the raw <psi|A|psi> when normalized is false).
inline std::map<std::string, std::vector<cplx>> observables(
    const TimeSeries& ts, const std::vector<ObservableRequest>& requests,
    bool normalized = true) {
  std::map<std::string, std::vector<cplx>> out;
  for (const auto& req : requests) {
    auto& series = out[req.name];
    series.reserve(ts.size());
    if (ts.payload_kind == PayloadKind::density) {
      for (const auto& rho : ts.densities) {
        if (rho.dim() != req.op.dim()) throw ShapeMismatch("observable '" + req.name + "' dimension");
        cplx s = 0.0;
        for (std::size_t i = 0; i < rho.dim(); ++i)
          for (std::size_t j = 0; j < rho.dim(); ++j) s += detail::mul(req.op(i, j), rho(j, i));
        series.push_back(s);
      }
    } else {
      for (const auto& psi : ts.vectors) {
        if (psi.size() != req.op.dim()) throw ShapeMismatch("observable '" + req.name + "' dimension");
        const cplx val = inner(psi, req.op * psi);
        series.push_back(normalized ? val / std::pow(norm(psi), 2) : val);
      }
    }
  }
  return out;
}

}  // namespace nhq
