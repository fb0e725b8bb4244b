#pragma once

// First moments <a_i> of a quadratic bosonic GKSL model obey
// i d/dt psi = G psi with G = C + (i/2) diag(gain - loss), where the rates
// are the GKSL prefactors of D[a_i^dag] and D[a_i].

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nhq/dynamics.hpp"
#include "nhq/models.hpp"
#include "nhq/numkernel.hpp"

namespace nhq {

class MeanFieldSystem {
 public:
  MeanFieldSystem(Operator coupling, std::vector<double> loss_rates, std::vector<double> gain_rates)
      : coupling_(std::move(coupling)),
        loss_(std::move(loss_rates)),
        gain_(std::move(gain_rates)),
        generator_(coupling_.dim()) {
    const std::size_t n = coupling_.dim();
    coupling_.require_finite("MeanFieldSystem coupling");
    if (!is_hermitian(coupling_, 1e-12))
      throw InvalidArgument("MeanFieldSystem: coupling matrix must be Hermitian");
    if (loss_.size() != n || gain_.size() != n)
      throw ShapeMismatch("MeanFieldSystem: rate vectors must have one entry per mode");
    for (double r : loss_)
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("MeanFieldSystem: loss rates must be finite and >= 0");
    for (double r : gain_)
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("MeanFieldSystem: gain rates must be finite and >= 0");
    generator_ = coupling_;
    for (std::size_t i = 0; i < n; ++i) generator_(i, i) += cplx(0, 0.5 * (gain_[i] - loss_[i]));
  }

  std::size_t modes() const { return coupling_.dim(); }
  const Operator& coupling() const { return coupling_; }
  const std::vector<double>& loss_rates() const { return loss_; }
  const std::vector<double>& gain_rates() const { return gain_; }
  const Operator& generator() const { return generator_; }

 private:
  Operator coupling_;
  std::vector<double> loss_;
  std::vector<double> gain_;
  Operator generator_;
};

// Two-mode coupled waveguides: mode 0 carries loss 2 gamma_loss, mode 1 gain
// 2 gamma_gain, so the generator is [[-i gamma_loss, g], [g, i gamma_gain]].
inline MeanFieldSystem gain_loss_meanfield(double g, double gamma_loss, double gamma_gain) {
  return MeanFieldSystem(Operator{{0.0, g}, {g, 0.0}}, {2.0 * gamma_loss, 0.0},
                         {0.0, 2.0 * gamma_gain});
}

inline Operator meanfield_generator(const MeanFieldSystem& sys) { return sys.generator(); }

inline std::string amplitude_name(std::size_t mode) { return "alpha_" + std::to_string(mode); }

// Records "alpha_<i>" and "norm_sq" per grid point.
inline TimeSeries evolve_meanfield(const MeanFieldSystem& sys, const CVector& psi0,
                                   std::span<const double> times) {
  if (psi0.size() != sys.modes()) throw ShapeMismatch("evolve_meanfield: amplitude count");
  for (auto z : psi0)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw NonFinite("evolve_meanfield: initial amplitudes must be finite");
  detail::check_times(times);
  detail::PropagatorCache cache(sys.generator() * cplx(0, -1));
  TimeSeries ts;
  ts.payload_kind = PayloadKind::meanfield;
  CVector psi = psi0;
  double t_prev = 0.0;
  for (double t : times) {
    if (t > t_prev) psi = cache.get(t - t_prev) * psi;
    t_prev = t;
    const double nrm = norm(psi);
    if (!(nrm <= kNormOverflow))
      throw Overflow("evolve_meanfield: norm exceeds 1e150 at t = " + std::to_string(t));
    ts.times.push_back(t);
    for (std::size_t i = 0; i < psi.size(); ++i) ts.observables[amplitude_name(i)].push_back(psi[i]);
    ts.observables["norm_sq"].push_back(nrm * nrm);
    ts.vectors.push_back(psi);
  }
  return ts;
}

struct CrossValidation {
  std::vector<double> max_abs_error;  // per mode
  double truncation_leakage = 0.0;
  TimeSeries meanfield;
  std::vector<std::vector<cplx>> quantum_amplitudes;  // [mode][time]
};

inline constexpr double kLeakageLimit = 1e-4;

// Largest population of any mode's top Fock level.
inline double top_level_population(const Operator& rho, std::size_t modes, std::size_t cutoff) {
  double worst = 0.0;
  std::vector<double> per_mode(modes);
  for (std::size_t idx = 0; idx < rho.dim(); ++idx) {
    std::size_t rem = idx;
    const double p = rho(idx, idx).real();
    for (std::size_t k = modes; k-- > 0;) {
      if (rem % (cutoff + 1) == cutoff) per_mode[k] += p;
      rem /= cutoff + 1;
    }
  }
  for (double p : per_mode) worst = std::max(worst, p);
  return worst;
}

// Compares evolve_meanfield against GKSL evolution of the truncated-Fock
// model started from the coherent product state with amplitudes alpha0.
inline CrossValidation crossvalidate(const MeanFieldSystem& sys, std::size_t cutoff,
                                     const CVector& alpha0, std::span<const double> times,
                                     LindbladMethod method = LindbladMethod::automatic,
                                     std::size_t cap = kDefaultDimensionCap) {
  const std::size_t modes = sys.modes();
  if (alpha0.size() != modes) throw ShapeMismatch("crossvalidate: amplitude count");
  CrossValidation out;
  out.meanfield = evolve_meanfield(sys, alpha0, times);

  const LindbladModel model =
      quadratic_bosonic_model(sys.coupling(), sys.loss_rates(), sys.gain_rates(), cutoff, cap);
  const CVector psi0 = coherent_product(alpha0, cutoff, cap);
  const TimeSeries quantum = evolve_lindblad(model, Operator::outer(psi0, psi0), times, method);

  for (const auto& rho : quantum.densities)
    out.truncation_leakage = std::max(out.truncation_leakage, top_level_population(rho, modes, cutoff));
  if (out.truncation_leakage > kLeakageLimit)
    throw TruncationDominates("crossvalidate: top Fock level population " +
                              std::to_string(out.truncation_leakage) + " exceeds 1e-4");

  const Operator a1 = boson_ladder(cutoff);
  std::vector<ObservableRequest> requests;
  for (std::size_t k = 0; k < modes; ++k)
    requests.push_back({amplitude_name(k), embed(a1, k, modes, cutoff, cap)});
  auto expectations = observables(quantum, requests);

  out.max_abs_error.assign(modes, 0.0);
  for (std::size_t k = 0; k < modes; ++k) {
    const auto& q = expectations[amplitude_name(k)];
    const auto& mf = out.meanfield.observables.at(amplitude_name(k));
    for (std::size_t i = 0; i < q.size(); ++i)
      out.max_abs_error[k] = std::max(out.max_abs_error[k], std::abs(q[i] - mf[i]));
    out.quantum_amplitudes.push_back(q);
  }
  return out;
}

}  // namespace nhq
