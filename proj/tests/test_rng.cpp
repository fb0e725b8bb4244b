#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nhq/rng.hpp"

using nhq::Philox4x32;
using nhq::RandomStream;

// Known-answer vectors for philox4x32-10.
TEST_CASE("philox4x32-10 known answers", "[rng]") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                          K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                          K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct", "[rng]") {
  RandomStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    same_c += (x == c.uniform());
    same_d += (x == d.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
}

TEST_CASE("uniform moments", "[rng]") {
  RandomStream s(2024, 0);
  const int n = 200000;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = s.uniform();
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  // 5 sigma bands for U(0,1).
  CHECK(std::abs(m1 - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(m2 - 1.0 / 3) < 5 * std::sqrt(4.0 / 45 / n));
}
