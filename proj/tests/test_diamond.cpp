#include <catch2/catch_amalgamated.hpp>

#include "memchan/diamond.hpp"

using namespace memchan;

namespace {

Channel random_channel(Rng& rng, long d_in, long d_out, long k) {
  while (d_out * k < d_in) ++k;
  CMatrix v = rng.haar_isometry(d_out * k, d_in);
  std::vector<CMatrix> ops;
  for (long e = 0; e < k; ++e) {
    CMatrix m(d_out, d_in);
    for (long o = 0; o < d_out; ++o) m.row(o) = v.row(o * k + e);
    ops.push_back(m);
  }
  return Channel::make(d_in, d_out, ops);
}

// probability p of replacing the state by the flat state
Channel partial_depolarizer(long d, double p) {
  std::vector<CMatrix> ops;
  ops.push_back(std::sqrt(1.0 - p) * CMatrix::Identity(d, d));
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      CMatrix k = CMatrix::Zero(d, d);
      k(i, j) = std::sqrt(p / double(d));
      ops.push_back(k);
    }
  return Channel::make(d, d, ops);
}

Channel unitary_channel(const CMatrix& u) {
  return Channel::make(u.cols(), u.rows(), {u});
}

}  // namespace

TEST_CASE("hermitian map plumbing") {
  Rng rng(11);
  Channel ch = random_channel(rng, 3, 2, 2);
  HermitianMap m = map_of(ch);

  CMatrix rho = rng.density(3, 3).mat;
  CMatrix via_blocks = apply_map(m, rho);
  CMatrix direct = schrodinger_apply(ch, rho);
  REQUIRE((via_blocks - direct).cwiseAbs().maxCoeff() < 1e-12);

  // product inputs factorize through the extended action
  CVector a = rng.pure_ket(3), b = rng.pure_ket(4);
  CVector psi(12);
  for (long i = 0; i < 3; ++i)
    for (long r = 0; r < 4; ++r) psi(i * 4 + r) = a(i) * b(r);
  CMatrix ext = apply_map_extended(m, psi, 4);
  CMatrix expect = tensor(apply_map(m, a * a.adjoint()), CMatrix(b * b.adjoint()));
  REQUIRE((ext - expect).cwiseAbs().maxCoeff() < 1e-12);

  CMatrix bad = CMatrix::Random(6, 6);
  bad(0, 1) = 5.0;
  bad(1, 0) = 0.0;
  REQUIRE_THROWS_AS(HermitianMap::make(3, 2, bad), validation_error);
}

TEST_CASE("zero map has zero norm") {
  HermitianMap m = HermitianMap::make(2, 2, CMatrix::Zero(4, 4));
  DiamondResult r = diamond_norm(m);
  REQUIRE(r.value == 0.0);
  REQUIRE(r.converged);
}

TEST_CASE("orthogonal-spectrum unitaries are perfectly distinguishable") {
  CMatrix z(2, 2);
  z << 1, 0, 0, -1;
  DiamondResult r = diamond_distance(unitary_channel(CMatrix::Identity(2, 2)),
                                     unitary_channel(z));
  REQUIRE(r.converged);
  REQUIRE(r.lower_witness <= 2.0 + 1e-9);
  REQUIRE(r.upper_certificate >= 2.0 - 1e-9);
  REQUIRE(std::abs(r.value - 2.0) < 1e-6);

  double w = diamond_lower_witness(map_difference(unitary_channel(CMatrix::Identity(2, 2)),
                                                  unitary_channel(z)));
  REQUIRE(w > 2.0 - 1e-8);
  REQUIRE(w <= r.upper_certificate + 1e-9);
}

TEST_CASE("partial depolarizer distance to identity") {
  // entangled-input value 2p(d^2-1)/d^2, attained on the maximally entangled
  // state; for d = 2, p = 0.3 this is 0.45
  const double expect = 0.45;
  HermitianMap diff = map_difference(identity_channel(2), partial_depolarizer(2, 0.3));

  double w = diamond_lower_witness(diff, 5, 3);
  REQUIRE(std::abs(w - expect) < 1e-9);

  DiamondResult r = diamond_norm(diff);
  REQUIRE(r.converged);
  REQUIRE(std::abs(r.value - expect) < 1e-6);
  REQUIRE(r.upper_certificate >= expect - 1e-9);
  REQUIRE(r.lower_witness <= expect + 1e-9);
}

TEST_CASE("channels themselves sit on the unit sphere") {
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Channel ch = random_channel(rng, 3, 2, 2);
    DiamondResult r = diamond_norm(map_of(ch));
    REQUIRE(r.converged);
    REQUIRE(std::abs(r.value - 1.0) < 1e-6);
  }
}

TEST_CASE("bracket, symmetry, triangle, choi lower bound") {
  Rng rng(23);
  Channel a = random_channel(rng, 2, 2, 2);
  Channel b = random_channel(rng, 2, 2, 2);
  Channel c = random_channel(rng, 2, 2, 2);

  DiamondResult ab = diamond_distance(a, b);
  DiamondResult ba = diamond_distance(b, a);
  DiamondResult bc = diamond_distance(b, c);
  DiamondResult ac = diamond_distance(a, c);

  for (const DiamondResult* r : {&ab, &ba, &bc, &ac}) {
    REQUIRE(r->converged);
    REQUIRE(r->lower_witness <= r->upper_certificate + 1e-12);
    REQUIRE(r->value <= r->upper_certificate + 1e-12);
    REQUIRE(r->value >= r->lower_witness - 1e-12);
  }
  REQUIRE(std::abs(ab.value - ba.value) < 2e-6);
  REQUIRE(ac.value <= ab.value + bc.value + 3e-6);

  double choi_lb = trace_norm(choi(a) - choi(b)) / 2.0;
  REQUIRE(ab.value >= choi_lb - 2e-6);
}

TEST_CASE("tensoring an identity leg changes nothing") {
  Rng rng(31);
  Channel a = random_channel(rng, 2, 2, 2);
  Channel b = random_channel(rng, 2, 2, 2);
  Channel id2 = identity_channel(2);
  double base = diamond_distance(a, b).value;
  double lifted = diamond_distance(tensor_channels(a, id2), tensor_channels(b, id2)).value;
  REQUIRE(std::abs(base - lifted) < 3e-6);
}

TEST_CASE("scaled identity map anchors the operator-norm route") {
  const long d = 3;
  const double lam = 0.7;
  CMatrix j = CMatrix::Zero(d * d, d * d);
  for (long i = 0; i < d; ++i)
    for (long k = 0; k < d; ++k) j(i * d + i, k * d + k) = lam;
  HermitianMap m = HermitianMap::make(d, d, j);

  REQUIRE(std::abs(cb_upper_from_opnorm(m) - lam * d * d) < 1e-8);
  REQUIRE(std::abs(diamond_lower_witness(m) - lam) < 1e-9);
  DiamondResult r = diamond_norm(m);
  REQUIRE(r.converged);
  REQUIRE(std::abs(r.value - lam) < 1e-6);
}

TEST_CASE("witness stays below the certified upper bound") {
  Rng rng(47);
  for (int trial = 0; trial < 3; ++trial) {
    Channel a = random_channel(rng, 2, 3, 2);
    Channel b = random_channel(rng, 2, 3, 2);
    HermitianMap diff = map_difference(a, b);
    DiamondResult r = diamond_norm(diff);
    double w = diamond_lower_witness(diff, 100 + trial, 4);
    REQUIRE(r.converged);
    REQUIRE(w <= r.upper_certificate + 1e-9);
    REQUIRE(w >= r.value - 1e-4);  // tiny instances: the search lands on the optimum
  }
}

TEST_CASE("tolerance knob widens the accepted bracket") {
  Rng rng(53);
  Channel a = random_channel(rng, 2, 2, 2);
  Channel b = random_channel(rng, 2, 2, 2);
  DiamondOptions loose;
  loose.tol = 1e-3;
  DiamondResult r = diamond_distance(a, b, loose);
  REQUIRE(r.converged);
  REQUIRE(r.upper_certificate - r.lower_witness <= 1e-3 + 1e-12);
}
