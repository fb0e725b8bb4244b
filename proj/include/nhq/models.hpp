#pragma once

// Concrete systems: bare (possibly non-Hermitian) generators and GKSL models
// built on truncated Fock spaces.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nhq/numkernel.hpp"

namespace nhq {

enum class Boundary { open, periodic };

inline Boundary parse_boundary(const std::string& token) {
  if (token == "open") return Boundary::open;
  if (token == "periodic") return Boundary::periodic;
  throw InvalidArgument("boundary must be 'open' or 'periodic', got '" + token + "'");
}

inline const char* to_string(Boundary b) {
  return b == Boundary::open ? "open" : "periodic";
}

struct Jump {
  double rate;
  Operator op;
};

// Hermitian Hamiltonian plus rated jump operators; defines a GKSL generator.
class LindbladModel {
 public:
  LindbladModel(Operator hamiltonian, std::vector<Jump> jumps,
                std::vector<std::string> labels = {})
      : hamiltonian_(std::move(hamiltonian)),
        jumps_(std::move(jumps)),
        labels_(std::move(labels)) {
    const std::size_t n = hamiltonian_.dim();
    if (!is_hermitian(hamiltonian_, 1e-12))
      throw InvalidArgument("LindbladModel: Hamiltonian is not Hermitian");
    for (const auto& j : jumps_) {
      if (!(j.rate > 0.0) || !std::isfinite(j.rate))
        throw InvalidArgument("LindbladModel: jump rates must be positive and finite");
      if (j.op.dim() != n) throw ShapeMismatch("LindbladModel: jump dimension mismatch");
    }
    if (labels_.empty())
      for (std::size_t i = 0; i < n; ++i) labels_.push_back(std::to_string(i));
    if (labels_.size() != n) throw ShapeMismatch("LindbladModel: label count mismatch");
  }

  std::size_t dim() const { return hamiltonian_.dim(); }
  const Operator& hamiltonian() const { return hamiltonian_; }
  const std::vector<Jump>& jumps() const { return jumps_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  Operator hamiltonian_;
  std::vector<Jump> jumps_;
  std::vector<std::string> labels_;
};

namespace detail {

inline void require_nonnegative(double x, const char* name) {
  if (!(x >= 0.0) || !std::isfinite(x))
    throw InvalidArgument(std::string(name) + " must be a finite non-negative rate");
}
inline void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " must be finite");
}
inline void require_sites(std::size_t n) {
  if (n < 2) throw InvalidArgument("N must be >= 2");
}

}  // namespace detail

// Index-reversal permutation: the default parity for PT checks.
inline Operator exchange_parity(std::size_t dim) {
  Operator p(dim);
  for (std::size_t i = 0; i < dim; ++i) p(i, dim - 1 - i) = 1.0;
  return p;
}

// [[+i gain, g], [g, -i loss]]
inline Operator gain_loss_dimer(double g, double gamma_gain, double gamma_loss) {
  detail::require_finite(g, "g");
  detail::require_nonnegative(gamma_gain, "gamma_gain");
  detail::require_nonnegative(gamma_loss, "gamma_loss");
  return Operator{{cplx(0, gamma_gain), g}, {g, cplx(0, -gamma_loss)}};
}

inline Operator gain_loss_dimer(double g, double gamma) {
  return gain_loss_dimer(g, gamma, gamma);
}

// Loss-only dimer [[-i gamma1, g], [g, -i gamma2]]; the balanced dimer
// shifted by -i (gamma1 + gamma2)/2.
inline Operator passive_pt_dimer(double g, double gamma1, double gamma2) {
  detail::require_finite(g, "g");
  detail::require_nonnegative(gamma1, "gamma1");
  detail::require_nonnegative(gamma2, "gamma2");
  return Operator{{cplx(0, -gamma1), g}, {g, cplx(0, -gamma2)}};
}

inline Operator nonreciprocal_2x2(cplx g1, cplx g2) {
  return Operator{{0.0, g1}, {g2, 0.0}};
}

// Basis order {|e>, |g>}; H = omega_e |e><e|, jump sqrt-rate Gamma on |g><e|.
inline LindbladModel two_level_decay(double omega_e, double decay_rate) {
  detail::require_finite(omega_e, "omega_e");
  if (!(decay_rate > 0.0) || !std::isfinite(decay_rate))
    throw InvalidArgument("Gamma must be positive");
  Operator h(2);
  h(0, 0) = omega_e;
  Operator lower(2);
  lower(1, 0) = 1.0;
  return LindbladModel(std::move(h), {Jump{decay_rate, std::move(lower)}}, {"e", "g"});
}

// Forward hop n -> n+1 has amplitude J(1+delta), backward J(1-delta); the
// periodic wraparound follows the same direction convention.
inline Operator hatano_nelson(std::size_t n, double hop, double delta, Boundary boundary) {
  detail::require_sites(n);
  if (!(hop > 0.0) || !std::isfinite(hop)) throw InvalidArgument("J must be positive");
  if (!(delta >= -1.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [-1, 1]");
  Operator h(n);
  const double fwd = hop * (1.0 + delta), bwd = hop * (1.0 - delta);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h(k + 1, k) += fwd;
    h(k, k + 1) += bwd;
  }
  if (boundary == Boundary::periodic) {
    h(0, n - 1) += fwd;
    h(n - 1, 0) += bwd;
  }
  return h;
}

// Single-excitation emitter Hamiltonian -i Gamma I + i Gamma S, with S the
// forward shift S[n+1, n] = 1.
inline Operator emitter_chain(std::size_t n, double rate, Boundary boundary) {
  detail::require_sites(n);
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("Gamma must be positive");
  Operator h(n);
  for (std::size_t k = 0; k < n; ++k) h(k, k) = cplx(0, -rate);
  for (std::size_t k = 0; k + 1 < n; ++k) h(k + 1, k) += cplx(0, rate);
  if (boundary == Boundary::periodic) h(0, n - 1) += cplx(0, rate);
  return h;
}

// ---------------------------------------------------------------------------
// Truncated bosonic modes

// (cutoff+1)-dimensional annihilation operator, a[n-1, n] = sqrt(n).
inline Operator boson_ladder(std::size_t cutoff) {
  if (cutoff < 1) throw InvalidArgument("cutoff must be >= 1");
  Operator a(cutoff + 1);
  for (std::size_t n = 1; n <= cutoff; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

// I x ... x op x ... x I with op on slot `mode` (mode 0 is the most
// significant tensor factor).
inline Operator embed(const Operator& op, std::size_t mode, std::size_t modes,
                      std::size_t cutoff, std::size_t cap = kDefaultDimensionCap) {
  if (mode >= modes) throw InvalidArgument("embed: mode index out of range");
  if (op.dim() != cutoff + 1) throw ShapeMismatch("embed: operator is not single-mode");
  const Operator id = Operator::identity(cutoff + 1);
  Operator out = mode == 0 ? op : id;
  for (std::size_t k = 1; k < modes; ++k) out = kronecker(out, k == mode ? op : id, cap);
  return out;
}

// Index of the Fock product state |n_0, ..., n_{N-1}>.
inline std::size_t fock_index(std::span<const std::size_t> occupations, std::size_t cutoff) {
  std::size_t idx = 0;
  for (auto n : occupations) {
    if (n > cutoff) throw InvalidArgument("occupation exceeds cutoff");
    idx = idx * (cutoff + 1) + n;
  }
  return idx;
}

inline std::vector<std::string> fock_labels(std::size_t modes, std::size_t cutoff) {
  std::size_t dim = 1;
  for (std::size_t k = 0; k < modes; ++k) dim *= cutoff + 1;
  std::vector<std::string> labels;
  labels.reserve(dim);
  std::vector<std::size_t> occ(modes, 0);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rem = idx;
    for (std::size_t k = modes; k-- > 0;) occ[k] = rem % (cutoff + 1), rem /= cutoff + 1;
    std::string s;
    for (std::size_t k = 0; k < modes; ++k) s += (k ? "_" : "") + std::to_string(occ[k]);
    labels.push_back("n" + s);
  }
  return labels;
}

// Truncated coherent state e^{-|a|^2/2} sum_n a^n/sqrt(n!) |n>, renormalized
// after truncation.
inline CVector coherent_state(cplx alpha, std::size_t cutoff) {
  if (cutoff < 1) throw InvalidArgument("cutoff must be >= 1");
  CVector v(cutoff + 1);
  v[0] = 1.0;
  for (std::size_t n = 1; n <= cutoff; ++n) v[n] = v[n - 1] * alpha / std::sqrt(double(n));
  return normalized(v);
}

// Product of single-mode coherent states, mode 0 most significant.
inline CVector coherent_product(std::span<const cplx> alphas, std::size_t cutoff,
                                std::size_t cap = kDefaultDimensionCap) {
  if (alphas.empty()) throw InvalidArgument("coherent_product: no modes");
  CVector out{1.0};
  for (auto a : alphas) {
    const CVector single = coherent_state(a, cutoff);
    if (out.size() > cap / single.size())
      throw DimensionOverflow("coherent_product: Fock space exceeds dimension cap");
    CVector next;
    next.reserve(out.size() * single.size());
    for (auto x : out)
      for (auto y : single) next.push_back(x * y);
    out = std::move(next);
  }
  return out;
}

// Matrix of op restricted to the single-excitation states |1_i>:
// out(i, j) = <1_i| op |1_j>.
inline Operator single_excitation_block(const Operator& op, std::size_t modes,
                                        std::size_t cutoff) {
  std::vector<std::size_t> idx(modes);
  for (std::size_t i = 0; i < modes; ++i) {
    std::vector<std::size_t> occ(modes, 0);
    occ[i] = 1;
    idx[i] = fock_index(occ, cutoff);
  }
  if (op.dim() <= idx.front()) throw ShapeMismatch("single_excitation_block: dimension");
  Operator out(modes);
  for (std::size_t i = 0; i < modes; ++i)
    for (std::size_t j = 0; j < modes; ++j) out(i, j) = op(idx[i], idx[j]);
  return out;
}

// Two modes a, b with H = J (a^dag b + b^dag a) and one collective jump
// c = a + e^{i phi} b at GKSL rate 2 gamma.
inline LindbladModel collective_jump_model(double hop, double gamma, double phi,
                                           std::size_t cutoff,
                                           std::size_t cap = kDefaultDimensionCap) {
  detail::require_finite(hop, "J");
  detail::require_finite(phi, "phi");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  const Operator a1 = boson_ladder(cutoff);
  const Operator a = embed(a1, 0, 2, cutoff, cap);
  const Operator b = embed(a1, 1, 2, cutoff, cap);
  Operator h = (a.adjoint() * b + b.adjoint() * a) * cplx(hop);
  Operator c = a + b * std::polar(1.0, phi);
  return LindbladModel(std::move(h), {Jump{2.0 * gamma, std::move(c)}}, fock_labels(2, cutoff));
}

// H = sum_ij C_ij a_i^dag a_j with loss jumps (loss_i, a_i) and gain jumps
// (gain_i, a_i^dag); zero rates contribute no jump.
inline LindbladModel quadratic_bosonic_model(const Operator& coupling,
                                             std::span<const double> loss_rates,
                                             std::span<const double> gain_rates,
                                             std::size_t cutoff,
                                             std::size_t cap = kDefaultDimensionCap) {
  const std::size_t modes = coupling.dim();
  if (loss_rates.size() != modes || gain_rates.size() != modes)
    throw ShapeMismatch("quadratic_bosonic_model: rate vectors must have one entry per mode");
  if (!is_hermitian(coupling, 1e-12))
    throw InvalidArgument("quadratic_bosonic_model: coupling matrix must be Hermitian");
  for (double r : loss_rates) detail::require_nonnegative(r, "loss rate");
  for (double r : gain_rates) detail::require_nonnegative(r, "gain rate");
  if (cutoff < 1) throw InvalidArgument("cutoff must be >= 1");
  std::size_t dim = 1;
  for (std::size_t k = 0; k < modes; ++k) {
    if (dim > cap / (cutoff + 1))
      throw DimensionOverflow("quadratic_bosonic_model: Fock space exceeds dimension cap");
    dim *= cutoff + 1;
  }

  const Operator a1 = boson_ladder(cutoff);
  std::vector<Operator> a;
  std::vector<Operator> ad;
  for (std::size_t k = 0; k < modes; ++k) {
    a.push_back(embed(a1, k, modes, cutoff, cap));
    ad.push_back(a.back().adjoint());
  }
  Operator h(dim);
  for (std::size_t i = 0; i < modes; ++i)
    for (std::size_t j = 0; j < modes; ++j)
      if (coupling(i, j) != cplx(0.0)) h += (ad[i] * a[j]) * coupling(i, j);
  h = hermitian_part(h);

  std::vector<Jump> jumps;
  for (std::size_t k = 0; k < modes; ++k) {
    if (loss_rates[k] > 0.0) jumps.push_back({loss_rates[k], a[k]});
    if (gain_rates[k] > 0.0) jumps.push_back({gain_rates[k], ad[k]});
  }
  return LindbladModel(std::move(h), std::move(jumps), fock_labels(modes, cutoff));
}

// ---------------------------------------------------------------------------
// Two-mode unit cell with loss on the b site

inline Operator intracell_pair(double hop, double gamma) {
  detail::require_finite(hop, "J");
  detail::require_nonnegative(gamma, "gamma");
  return Operator{{0.0, hop}, {hop, cplx(0, -2.0 * gamma)}};
}

// Columns express (a, b) in terms of (A, B): a = (A - iB)/sqrt2,
// b = -i(A + iB)/sqrt2.
inline Operator intracell_transform() {
  const double r = 1.0 / std::sqrt(2.0);
  return Operator{{r, cplx(0, -r)}, {cplx(0, -r), r}};
}

inline Operator transformed_intracell(double hop, double gamma) {
  const Operator t = intracell_transform();
  return t.adjoint() * intracell_pair(hop, gamma) * t;
}

}  // namespace nhq
