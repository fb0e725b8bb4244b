#pragma once

// Non-Hermitian spectral analysis: PT-symmetry tests and phase
// classification, exceptional-point diagnostics, EP location along a
// one-parameter family, effective Hamiltonians and localization metrics.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nhq/models.hpp"
#include "nhq/numkernel.hpp"

namespace nhq {

struct SpectralThresholds {
  double pt_symmetry_rel = 1e-12;      // ||P conj(H) P - H||_F / ||H||_F
  double phase_rel = 1e-9;             // |Im lambda| / ||H||_F counted as real
  double eigvec_pt = 1e-6;             // ||P conj(phi) - e^{i theta} phi||
  double near_ep_overlap = 0.999;
  double defective_condition = kDefectiveCondition;
};

inline constexpr SpectralThresholds kDefaultThresholds{};

enum class EPClass { regular, near_EP, defective };
enum class PTPhase { unbroken, broken, EP, not_PT };

inline const char* to_string(EPClass c) {
  switch (c) {
    case EPClass::regular: return "regular";
    case EPClass::near_EP: return "near_EP";
    case EPClass::defective: return "defective";
  }
  return "?";
}

inline const char* to_string(PTPhase p) {
  switch (p) {
    case PTPhase::unbroken: return "unbroken";
    case PTPhase::broken: return "broken";
    case PTPhase::EP: return "EP";
    case PTPhase::not_PT: return "not_PT";
  }
  return "?";
}

struct EPReport {
  double min_eigenvalue_gap = std::numeric_limits<double>::infinity();
  double max_pair_overlap = 0.0;
  double vector_condition = 1.0;
  EPClass classification = EPClass::regular;
};

struct PhasePoint {
  double parameter_value = 0.0;
  CVector eigenvalues;
  PTPhase phase = PTPhase::not_PT;
  EPReport ep_report;
};

using OperatorFamily = std::function<Operator(double)>;

inline EPReport ep_metrics(const Spectrum& s,
                           const SpectralThresholds& th = kDefaultThresholds) {
  EPReport r;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      r.min_eigenvalue_gap =
          std::min(r.min_eigenvalue_gap, std::abs(s.eigenvalues[i] - s.eigenvalues[j]));
      r.max_pair_overlap = std::max(
          r.max_pair_overlap, std::min(1.0, std::abs(inner(s.right_vectors[i], s.right_vectors[j]))));
    }
  r.vector_condition = s.vector_condition;
  if (r.vector_condition >= th.defective_condition)
    r.classification = EPClass::defective;
  else if (r.max_pair_overlap >= th.near_ep_overlap)
    r.classification = EPClass::near_EP;
  return r;
}

inline bool is_pt_symmetric(const Operator& h, const Operator& parity,
                            const SpectralThresholds& th = kDefaultThresholds) {
  if (h.dim() != parity.dim()) throw ShapeMismatch("is_pt_symmetric: parity dimension");
  const Operator image = parity * h.conjugate() * parity;
  return (image - h).frobenius_norm() <= th.pt_symmetry_rel * h.frobenius_norm();
}

// ||P conj(phi) - e^{i theta} phi|| with theta = arg <phi| P conj(phi)>.
inline double pt_eigenvector_defect(const CVector& phi, const Operator& parity) {
  CVector conj_phi(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) conj_phi[i] = std::conj(phi[i]);
  const CVector image = parity * conj_phi;
  const cplx ov = inner(phi, image);
  const cplx phase = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1.0);
  double d = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) d += std::norm(image[i] - phase * phi[i]);
  return std::sqrt(d);
}

inline PhasePoint classify_pt_phase(const Operator& h, const Operator& parity,
                                    double parameter_value = 0.0,
                                    const SpectralThresholds& th = kDefaultThresholds) {
  const Spectrum s = eigendecompose(h);
  PhasePoint p;
  p.parameter_value = parameter_value;
  p.eigenvalues = s.eigenvalues;
  p.ep_report = ep_metrics(s, th);
  if (!is_pt_symmetric(h, parity, th)) {
    p.phase = PTPhase::not_PT;
    return p;
  }
  if (p.ep_report.classification != EPClass::regular) {
    p.phase = PTPhase::EP;
    return p;
  }
  const double tol = th.phase_rel * h.frobenius_norm();
  bool real = true;
  for (auto l : s.eigenvalues) real = real && std::abs(l.imag()) <= tol;
  bool self_conjugate = true;
  for (const auto& v : s.right_vectors)
    self_conjugate = self_conjugate && pt_eigenvector_defect(v, parity) <= th.eigvec_pt;
  p.phase = (real && self_conjugate) ? PTPhase::unbroken : PTPhase::broken;
  return p;
}

inline PhasePoint classify_pt_phase(const Operator& h, double parameter_value = 0.0) {
  return classify_pt_phase(h, exchange_parity(h.dim()), parameter_value);
}

inline double min_eigenvalue_gap(const Operator& h) {
  const CVector l = eigenvalues(h);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < l.size(); ++i)
    for (std::size_t j = i + 1; j < l.size(); ++j) gap = std::min(gap, std::abs(l[i] - l[j]));
  return gap;
}

// Coarse scan over `budget` points, then golden-section refinement of the
// first interior local minimum of the eigenvalue gap.
inline double locate_ep(const OperatorFamily& family, double lo, double hi, std::size_t budget) {
  if (!(hi > lo)) throw InvalidArgument("locate_ep: require lo < hi");
  if (budget < 3) throw InvalidArgument("locate_ep: budget must be >= 3");
  std::vector<double> xs(budget), gaps(budget);
  for (std::size_t k = 0; k < budget; ++k) {
    xs[k] = lo + (hi - lo) * double(k) / double(budget - 1);
    gaps[k] = min_eigenvalue_gap(family(xs[k]));
  }
  std::size_t best = budget;
  for (std::size_t k = 1; k + 1 < budget; ++k)
    if (gaps[k] <= gaps[k - 1] && gaps[k] <= gaps[k + 1] &&
        (gaps[k] < gaps[k - 1] || gaps[k] < gaps[k + 1])) {
      best = k;
      break;
    }
  if (best == budget) throw NoMinimum("locate_ep: eigenvalue gap is monotonic over the range");

  double a = xs[best - 1], b = xs[best + 1];
  const double tol = 1e-8 * (hi - lo);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = min_eigenvalue_gap(family(c)), fd = min_eigenvalue_gap(family(d));
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = min_eigenvalue_gap(family(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = min_eigenvalue_gap(family(d));
    }
  }
  return 0.5 * (a + b);
}

// H - (i/2) sum_k Gamma_k L_k^dag L_k
inline Operator effective_hamiltonian(const LindbladModel& m) {
  Operator h = m.hamiltonian();
  for (const auto& j : m.jumps()) h -= (j.op.adjoint() * j.op) * cplx(0.0, 0.5 * j.rate);
  return h;
}

struct Localization {
  double ipr;
  double center_of_mass;
};

inline std::vector<Localization> localization_metrics(const Spectrum& s) {
  std::vector<Localization> out;
  out.reserve(s.size());
  for (const auto& v : s.right_vectors) {
    double ipr = 0.0, com = 0.0, total = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
      const double p = std::norm(v[n]);
      total += p;
      ipr += p * p;
      com += double(n) * p;
    }
    out.push_back({ipr / (total * total), com / total});
  }
  return out;
}

inline std::vector<PhasePoint> pt_sweep(const OperatorFamily& family,
                                        std::span<const double> grid) {
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (grid[k] < grid[k - 1]) throw InvalidArgument("pt_sweep: grid must be sorted");
  std::vector<PhasePoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const Operator h = family(x);
    out.push_back(classify_pt_phase(h, exchange_parity(h.dim()), x));
  }
  return out;
}

}  // namespace nhq
