#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "nhq/dynamics.hpp"
#include "oracles.hpp"

using namespace nhq;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a + (b - a) * double(k) / double(n - 1);
  return out;
}

Operator projector(std::size_t dim, std::size_t k) {
  Operator p(dim);
  p(k, k) = 1.0;
  return p;
}

LindbladModel random_model(std::mt19937_64& rng, std::size_t dim, std::size_t njumps) {
  std::uniform_real_distribution<double> rate(0.1, 1.5);
  std::vector<Jump> jumps;
  for (std::size_t k = 0; k < njumps; ++k)
    jumps.push_back({rate(rng), oracle::random_operator(rng, dim, 0.5)});
  return LindbladModel(oracle::random_hermitian(rng, dim), std::move(jumps));
}

}  // namespace

TEST_CASE("liouvillian structure", "[dynamics]") {
  SECTION("two-level decay spectrum {0, -1, -1/2, -1/2}") {
    auto l = liouvillian(two_level_decay(0.0, 1.0));
    auto lam = eigenvalues(l);
    CHECK(std::abs(lam[0] - cplx(-1.0)) < 1e-14);
    CHECK(std::abs(lam[1] - cplx(-0.5)) < 1e-14);
    CHECK(std::abs(lam[2] - cplx(-0.5)) < 1e-14);
    CHECK(std::abs(lam[3]) < 1e-14);
  }
  SECTION("closed system is anti-Hermitian") {
    std::mt19937_64 rng(2);
    LindbladModel closed(oracle::random_hermitian(rng, 3), {});
    auto l = liouvillian(closed);
    CHECK(oracle::fro_diff(l.adjoint(), -l) < 1e-14);
    for (auto z : eigenvalues(l)) CHECK(std::abs(z.real()) < 1e-12);
  }
  SECTION("trace preservation: vec(I)^dag L = 0") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
      auto m = random_model(rng, 4, 3);
      auto l = liouvillian(m);
      auto id = vectorize(Operator::identity(4));
      for (std::size_t c = 0; c < l.dim(); ++c) {
        cplx s = 0.0;
        for (std::size_t r = 0; r < l.dim(); ++r) s += std::conj(id[r]) * l(r, c);
        CHECK(std::abs(s) < 1e-12 * l.frobenius_norm());
      }
    }
  }
  SECTION("decomposition into no-jump part plus jump term") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t dim = 2 + rep % 4;
      auto m = random_model(rng, dim, 1 + rep % 3);
      auto rho = oracle::random_density(rng, dim);
      auto heff = effective_hamiltonian(m);
      Operator rhs = (oracle::matmul(heff, rho) - oracle::matmul(rho, heff.adjoint())) * cplx(0, -1);
      for (const auto& j : m.jumps())
        rhs += oracle::matmul(oracle::matmul(j.op, rho), j.op.adjoint()) * cplx(j.rate);
      auto lhs = oracle::matvec(liouvillian(m), vectorize(rho));
      auto ref = vectorize(rhs);
      for (std::size_t k = 0; k < lhs.size(); ++k) CHECK(std::abs(lhs[k] - ref[k]) <= 1e-12 * (1 + std::abs(ref[k])));
    }
  }
  SECTION("dimension cap") {
    LindbladModel big(Operator(200), {});
    CHECK_THROWS_AS(liouvillian(big), DimensionOverflow);
  }
}

TEST_CASE("evolve_lindblad two-level decay", "[dynamics]") {
  auto m = two_level_decay(1.0, 1.0);
  auto times = linspace(0.0, 5.0, 101);
  auto ts = evolve_lindblad(m, projector(2, 0), times);
  REQUIRE(ts.size() == 101);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const auto& rho = ts.densities[k];
    CHECK(std::abs(rho(0, 0).real() - std::exp(-times[k])) <= 1e-12);
    CHECK(std::abs(rho(1, 1).real() - (1 - std::exp(-times[k]))) <= 1e-12);
    CHECK(std::abs(rho(0, 1)) <= 1e-14);
  }
  std::vector<double> ln2{std::log(2.0)};
  auto half = evolve_lindblad(m, projector(2, 0), ln2);
  CHECK_THAT(half.densities[0](0, 0).real(), WithinAbs(0.5, 1e-14));

  auto rk = evolve_lindblad(m, projector(2, 0), times, LindbladMethod::rk4, 0.01);
  for (std::size_t k = 0; k < rk.size(); ++k)
    CHECK(std::abs(rk.densities[k](0, 0).real() - std::exp(-times[k])) <= 1e-9);

  auto obs = observables(ts, {{"rho_eg", Operator{{0, 0}, {1, 0}}}});
  for (auto v : obs["rho_eg"]) CHECK(std::abs(v) <= 1e-14);
}

TEST_CASE("evolve_lindblad input validation", "[dynamics]") {
  auto m = two_level_decay(1.0, 1.0);
  std::vector<double> t{0.0, 1.0};
  CHECK_THROWS_AS(evolve_lindblad(m, Operator::identity(2), t), InvalidArgument);
  CHECK_THROWS_AS(evolve_lindblad(m, projector(3, 0), t), ShapeMismatch);
  std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(evolve_lindblad(m, projector(2, 0), bad), InvalidArgument);
  Operator nonpos{{1.5, 0}, {0, -0.5}};
  CHECK_THROWS_AS(evolve_lindblad(m, nonpos, t), InvalidArgument);
}

TEST_CASE("rk4 with too coarse a step reports a positivity violation", "[dynamics]") {
  // Fast decay with dt_max far above 1/Gamma drives the RK4 update unstable.
  auto m = two_level_decay(0.0, 100.0);
  std::vector<double> t{1.0};
  CHECK_THROWS_AS(evolve_lindblad(m, projector(2, 0), t, LindbladMethod::rk4, 0.1), PositivityViolation);
}

TEST_CASE("GKSL channel properties on random models", "[dynamics]") {
  std::mt19937_64 rng(123);
  auto times = linspace(0.0, 2.0, 11);
  for (int rep = 0; rep < 8; ++rep) {
    const std::size_t dim = 2 + rep % 5;
    auto m = random_model(rng, dim, 1 + rep % 3);
    auto rho0 = oracle::random_density(rng, dim);
    auto ts = evolve_lindblad(m, rho0, times);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto& rho = ts.densities[k];
      CHECK(std::abs(rho.trace() - 1.0) <= 1e-8);
      CHECK((rho - rho.adjoint()).frobenius_norm() <= 1e-8);
      CHECK(ts.observables["min_eigenvalue"][k].real() >= -kPositivityTol);
    }
    // Semigroup: evolving to t1 then t2 equals evolving to t1 + t2.
    std::vector<double> t1{0.7}, t2{0.55}, t12{1.25};
    auto a = evolve_lindblad(m, rho0, t1);
    auto b = evolve_lindblad(m, hermitian_part(a.densities[0]) * cplx(1.0 / a.densities[0].trace().real()), t2);
    auto c = evolve_lindblad(m, rho0, t12);
    CHECK(oracle::fro_diff(b.densities[0], c.densities[0]) <= 1e-9);
  }
}

TEST_CASE("closed evolution conserves purity", "[dynamics]") {
  std::mt19937_64 rng(9);
  LindbladModel closed(oracle::random_hermitian(rng, 4), {});
  CVector psi = normalized(CVector{1.0, cplx(0, 1), 0.5, -0.25});
  auto ts = evolve_lindblad(closed, Operator::outer(psi, psi), linspace(0, 3, 7));
  for (auto p : ts.observables["purity"]) CHECK_THAT(p.real(), WithinAbs(1.0, 1e-10));
}

TEST_CASE("evolve_nh_state", "[dynamics]") {
  auto times = linspace(0.0, 4.0, 41);
  SECTION("two-level no-jump decay keeps p_g = 0") {
    Operator heff{{cplx(1, -0.5), 0}, {0, 0}};
    auto ts = evolve_nh_state(heff, basis_vector(2, 0), times);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      CHECK_THAT(std::norm(ts.vectors[k][0]), WithinAbs(std::exp(-times[k]), 1e-13));
      CHECK(std::norm(ts.vectors[k][1]) == 0.0);
      CHECK_THAT(ts.observables["norm_sq"][k].real(), WithinAbs(std::exp(-times[k]), 1e-13));
    }
    auto rn = evolve_nh_state(heff, basis_vector(2, 0), times, true);
    for (std::size_t k = 0; k < rn.size(); ++k) {
      CHECK_THAT(norm(rn.vectors[k]), WithinAbs(1.0, 1e-14));
      CHECK(rn.observables["norm_sq"][k] == ts.observables["norm_sq"][k]);
    }
  }
  SECTION("Hermitian generator conserves the norm") {
    std::mt19937_64 rng(4);
    auto h = oracle::random_hermitian(rng, 5);
    auto ts = evolve_nh_state(h, normalized(CVector{1, 2, 3, 4, 5}), times);
    for (auto n : ts.observables["norm_sq"]) CHECK_THAT(n.real(), WithinAbs(1.0, 1e-10));
  }
  SECTION("norm is non-increasing for pure-loss effective Hamiltonians") {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 5; ++rep) {
      auto m = random_model(rng, 4, 2);
      auto ts = evolve_nh_state(effective_hamiltonian(m), normalized(CVector{1, 1, 0.5, cplx(0, 1)}), times);
      const auto& n = ts.observables["norm_sq"];
      for (std::size_t k = 1; k < n.size(); ++k) CHECK(n[k].real() <= n[k - 1].real() * (1 + 1e-12));
    }
  }
  SECTION("broken-phase dimer: both inputs approach the amplifying eigenvector") {
    const double g = 1.0;
    auto h = gain_loss_dimer(g, 2.0 * g);
    std::vector<double> t{20.0 / g};
    auto a = evolve_nh_state(h, basis_vector(2, 0), t, true);
    auto b = evolve_nh_state(h, basis_vector(2, 1), t, true);
    CHECK(oracle::overlap(a.vectors[0], b.vectors[0]) >= 0.999);
    auto s = eigendecompose(h);
    const CVector& top = s.eigenvalues[0].imag() > s.eigenvalues[1].imag() ? s.right_vectors[0] : s.right_vectors[1];
    CHECK(oracle::overlap(a.vectors[0], top) >= 0.999);
  }
  SECTION("overflow") {
    auto h = gain_loss_dimer(0.0, 10.0, 0.0);
    std::vector<double> t{40.0};
    CHECK_THROWS_AS(evolve_nh_state(h, basis_vector(2, 0), t), Overflow);
    // exp(1000) leaves the double range inside the propagator itself.
    std::vector<double> far{100.0};
    CHECK_THROWS_AS(evolve_nh_state(h, basis_vector(2, 0), far), Overflow);
  }
  SECTION("zero initial state") {
    CHECK_THROWS_AS(evolve_nh_state(Operator(2), CVector(2), times), InvalidArgument);
  }
}

TEST_CASE("evolve_nh_density", "[dynamics]") {
  auto m = two_level_decay(1.0, 1.0);
  auto times = linspace(0.0, 5.0, 51);
  auto nh = evolve_nh_density(effective_hamiltonian(m), projector(2, 0), times);
  auto full = evolve_lindblad(m, projector(2, 0), times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK_THAT(nh.densities[k](0, 0).real(), WithinAbs(std::exp(-times[k]), 1e-13));
    CHECK(std::abs(nh.densities[k](1, 1)) == 0.0);
    // The jump term only feeds rho_gg.
    CHECK_THAT(nh.densities[k](0, 0).real(), WithinAbs(full.densities[k](0, 0).real(), 1e-12));
    CHECK((nh.densities[k] - nh.densities[k].adjoint()).frobenius_norm() <= 1e-10);
  }
  std::mt19937_64 rng(3);
  auto h = oracle::random_hermitian(rng, 3);
  auto ts = evolve_nh_density(h, oracle::random_density(rng, 3), times);
  for (auto tr : ts.observables["trace"]) CHECK_THAT(tr.real(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("observables", "[dynamics]") {
  TimeSeries ts;
  ts.times = {0.0};
  ts.densities.push_back(Operator::diagonal(std::vector<cplx>{0.3, 0.7}));
  auto obs = observables(ts, {{"rho_ee", projector(2, 0)}});
  CHECK(obs["rho_ee"][0] == cplx(0.3));
  CHECK_THROWS_AS(observables(ts, {{"bad", projector(3, 0)}}), ShapeMismatch);

  // <a> on a truncated coherent state: expansion oracle sum sqrt(n) c_{n-1}^* c_n.
  for (cplx alpha : {cplx(0.3, 0.0), cplx(-0.2, 0.4), cplx(0.5, 0.0)}) {
    for (std::size_t cutoff : {8u, 12u}) {
      TimeSeries pure;
      pure.payload_kind = PayloadKind::pure_state;
      pure.times = {0.0};
      pure.vectors.push_back(coherent_state(alpha, cutoff));
      auto a = observables(pure, {{"a", boson_ladder(cutoff)}});
      CHECK(std::abs(a["a"][0] - alpha) <= 1e-6);
      // Raw variant on an unnormalized vector.
      pure.vectors[0][0] *= 1.0;
      for (auto& z : pure.vectors[0]) z *= 2.0;
      auto raw = observables(pure, {{"a", boson_ladder(cutoff)}}, false);
      CHECK(std::abs(raw["a"][0] - 4.0 * a["a"][0]) <= 1e-12);
    }
  }
}

TEST_CASE("trajectory ensemble", "[dynamics][trajectories]") {
  auto m = two_level_decay(1.0, 1.0);
  auto times = linspace(0.0, 5.0, 101);
  auto exact = evolve_lindblad(m, projector(2, 0), times);
  auto max_error = [&](const EnsembleResult& r) {
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
      worst = std::max(worst, oracle::trace_distance(r.mean_density.densities[k], exact.densities[k]));
    return worst;
  };

  SECTION("converges to the GKSL solution") {
    TrajectoryOptions opt;
    opt.trajectories = 2000;
    opt.seed = 7;
    auto r = run_trajectories(m, basis_vector(2, 0), times, opt);
    CHECK(max_error(r) <= 3.0 / std::sqrt(2000.0));
    for (auto tr : r.mean_density.observables["trace"]) CHECK(std::abs(tr - 1.0) <= 1e-12);
    std::size_t total = 0;
    for (auto j : r.jump_counts) {
      CHECK(j <= 1);
      total += j;
    }
    // P(jump before t = 5) = 1 - e^-5.
    CHECK(std::abs(double(total) / 2000 - (1 - std::exp(-5.0))) < 0.02);
    CHECK(r.stderr_estimate.size() == times.size());
    CHECK(r.stderr_estimate.front() == 0.0);
  }
  SECTION("error decreases with ensemble size") {
    TrajectoryOptions small{250, 11, 0.01, 1}, large{4000, 11, 0.01, 1};
    CHECK(max_error(run_trajectories(m, basis_vector(2, 0), times, large)) <
          max_error(run_trajectories(m, basis_vector(2, 0), times, small)));
  }
  SECTION("jump-free model reduces to pure-state evolution") {
    std::mt19937_64 rng(1);
    LindbladModel closed(oracle::random_hermitian(rng, 3), {});
    CVector psi = normalized(CVector{1, cplx(0, 1), 2});
    TrajectoryOptions opt{16, 3, 0.05, 1};
    auto r = run_trajectories(closed, psi, times, opt);
    auto pure = evolve_nh_state(closed.hamiltonian(), psi, times);
    for (std::size_t k = 0; k < times.size(); k += 10)
      CHECK(oracle::fro_diff(r.mean_density.densities[k], Operator::outer(pure.vectors[k], pure.vectors[k])) < 1e-10);
    for (auto j : r.jump_counts) CHECK(j == 0);
  }
  SECTION("bit-identical across runs and thread counts") {
    TrajectoryOptions one{300, 99, 0.01, 1}, four{300, 99, 0.01, 4};
    auto a = run_trajectories(m, basis_vector(2, 0), times, one);
    auto b = run_trajectories(m, basis_vector(2, 0), times, one);
    auto c = run_trajectories(m, basis_vector(2, 0), times, four);
    CHECK(a.jump_counts == c.jump_counts);
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.mean_density.densities[k].data()[i] == b.mean_density.densities[k].data()[i]);
        CHECK(a.mean_density.densities[k].data()[i] == c.mean_density.densities[k].data()[i]);
      }
    }
  }
  SECTION("rates too fast for the step") {
    auto fast = two_level_decay(0.0, 100.0);
    TrajectoryOptions opt{4, 1, 0.01, 1};
    CHECK_THROWS_AS(run_trajectories(fast, basis_vector(2, 0), times, opt), StepTooLarge);
    // Moderate rates are handled by splitting the step.
    auto mid = two_level_decay(0.0, 20.0);
    CHECK_NOTHROW(run_trajectories(mid, basis_vector(2, 0), times, opt));
  }
  SECTION("initial state must be normalized") {
    TrajectoryOptions opt{4, 1, 0.01, 1};
    CHECK_THROWS_AS(run_trajectories(m, CVector{1.0, 1.0}, times, opt), InvalidArgument);
  }
}
