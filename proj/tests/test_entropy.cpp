#include <catch2/catch_amalgamated.hpp>

#include "memchan/entropy.hpp"

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

Channel dephasing(double p) {
  CMatrix z(2, 2);
  z << 1, 0, 0, -1;
  return Channel::make(2, 2,
                       {std::sqrt(1.0 - p) * CMatrix::Identity(2, 2), std::sqrt(p) * z});
}

Ensemble basis_ensemble(long d) {
  std::vector<double> p(d, 1.0 / d);
  std::vector<DensityMatrix> s;
  for (long i = 0; i < d; ++i) s.push_back(basis_state(d, i));
  return Ensemble::make(p, s);
}

Ensemble plus_minus_ensemble() {
  CVector plus(2), minus(2);
  plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  minus << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
  return Ensemble::make({0.5, 0.5}, {DensityMatrix{plus * plus.adjoint()},
                                     DensityMatrix{minus * minus.adjoint()}});
}

double h2(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1 - x) * std::log2(1 - x);
}

}  // namespace

TEST_CASE("entropy basics") {
  REQUIRE(vn_entropy(basis_state(4, 2)) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(vn_entropy(maximally_mixed(2)) == Catch::Approx(1.0).margin(1e-13));
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 0.75;
  d(1, 1) = 0.25;
  REQUIRE(vn_entropy(DensityMatrix::make(d)) ==
          Catch::Approx(0.8112781244591328).margin(1e-12));
}

TEST_CASE("holevo chi closed forms") {
  REQUIRE(holevo_chi(identity_channel(2), basis_ensemble(2)) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(holevo_chi(depolarizing_channel(2), plus_minus_ensemble()) ==
          Catch::Approx(0.0).margin(1e-12));

  // dephasing sends |+-><+-| to states with spectrum {1-p, p}
  for (double p : {0.3, 0.5}) {
    REQUIRE(holevo_chi(dephasing(p), plus_minus_ensemble()) ==
            Catch::Approx(1.0 - h2(p)).margin(1e-12));
  }

  REQUIRE_THROWS_AS(holevo_chi(identity_channel(3), basis_ensemble(2)), dimension_error);
}

TEST_CASE("chi range and post-processing monotonicity") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Channel s = random_channel(rng, 3, 3, 2);
    Channel r = random_channel(rng, 3, 2, 2);
    std::vector<double> p{0.2, 0.5, 0.3};
    std::vector<DensityMatrix> st;
    for (int i = 0; i < 3; ++i) st.push_back(rng.density(3, 2));
    Ensemble e = Ensemble::make(p, st);
    double chi_s = holevo_chi(s, e);
    REQUIRE(chi_s >= 0.0);
    REQUIRE(chi_s <= std::log2(3.0) + 1e-12);
    REQUIRE(holevo_chi(compose(r, s), e) <= chi_s + 1e-9);
  }
}

TEST_CASE("coherent information anchors") {
  REQUIRE(coherent_info(identity_channel(2), maximally_mixed(2)) ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE(coherent_info(depolarizing_channel(2), maximally_mixed(2)) ==
          Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(coherent_info(dephasing(0.3), basis_state(2, 0)) == Catch::Approx(0.0).margin(1e-10));

  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    Channel ch = random_channel(rng, 3, 2, 2);
    Channel comp = complementary(ch);
    DensityMatrix rho = rng.density(3, 3);
    REQUIRE(coherent_info(ch, rho) ==
            Catch::Approx(coherent_info_via_complement(ch, comp, rho)).margin(1e-10));
    REQUIRE(coherent_info(ch, rho) <= entropy_bits(schrodinger_apply(ch, rho.mat)) + 1e-12);
  }
}

TEST_CASE("pure-ensemble chi gap equals coherent information") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    Channel ch = random_channel(rng, 3, 2, 2);
    std::vector<double> p{0.4, 0.35, 0.25};
    std::vector<DensityMatrix> st;
    CMatrix avg = CMatrix::Zero(3, 3);
    for (int i = 0; i < 3; ++i) {
      CVector k = rng.pure_ket(3);
      st.push_back(DensityMatrix{k * k.adjoint()});
      avg += p[i] * st.back().mat;
    }
    Ensemble e = Ensemble::make(p, st);
    REQUIRE(std::abs(coherent_info(ch, DensityMatrix::make(avg)) - private_chi_gap(ch, e)) <
            1e-8);
  }
}

TEST_CASE("private gap signs") {
  CMatrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  Channel uni = Channel::make(2, 2, {h});
  Ensemble e = plus_minus_ensemble();
  REQUIRE(private_chi_gap(uni, e) == Catch::Approx(holevo_chi(uni, e)).margin(1e-12));
  REQUIRE(private_chi_gap(depolarizing_channel(2), e) <= 1e-12);
}

TEST_CASE("chi maximizer") {
  ChiResult id = maximize_chi(identity_channel(2), 4, 2, 0, 80);
  REQUIRE(id.value >= 1.0 - 1e-4);
  REQUIRE(id.value <= 1.0 + 1e-9);
  for (std::size_t i = 1; i < id.trace.size(); ++i) REQUIRE(id.trace[i] >= id.trace[i - 1]);

  MemoryChannel sh = shift_channel(2);
  Channel ee = effective_channel(sh, 2, CapacitySetting::ee(basis_state(2, 0)));
  REQUIRE(maximize_chi(ee, 6, 2, 0, 80).value == Catch::Approx(1.0).margin(1e-3));

  Channel ab = effective_channel(sh, 2, CapacitySetting::ab());
  REQUIRE(maximize_chi(ab, 10, 1, 0, 60).value == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("coherent maximizer against a spectral grid oracle") {
  CoherentResult id = maximize_coherent(identity_channel(2), 2, 0, 120);
  REQUIRE(id.value >= 1.0 - 1e-4);
  for (std::size_t i = 1; i < id.trace.size(); ++i) REQUIRE(id.trace[i] >= id.trace[i - 1]);

  // depolarizing output depends only on the input spectrum, so a dense scan
  // over diag((1+t)/2, (1-t)/2) is exhaustive
  Channel dep = partial_depolarizer(2, 0.5);
  double oracle = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 200; ++k) {
    double t = k / 200.0;
    CMatrix r = CMatrix::Zero(2, 2);
    r(0, 0) = (1 + t) / 2;
    r(1, 1) = (1 - t) / 2;
    oracle = std::max(oracle, coherent_info(dep, DensityMatrix::make(r)));
  }
  CoherentResult found = maximize_coherent(dep, 3, 1, 250);
  REQUIRE(std::abs(found.value - oracle) < 1e-3);
}

TEST_CASE("sqrt-parametrized gradient matches central differences") {
  Rng rng(17);
  Channel ch = random_channel(rng, 3, 2, 2);
  Channel comp = complementary(ch);

  auto f = [&](const CMatrix& a) {
    double tau = (a * a.adjoint()).trace().real();
    return coherent_info_via_complement(ch, comp, DensityMatrix{a * a.adjoint() / tau});
  };

  for (int trial = 0; trial < 6; ++trial) {
    CMatrix a = rng.ginibre(3, 3);
    CMatrix grad = coherent_sqrt_gradient(ch, comp, a);
    long k = rng.integer(3), l = rng.integer(3);
    double h = 1e-5;

    CMatrix e = CMatrix::Zero(3, 3);
    e(k, l) = 1.0;
    double num_re = (f(a + h * e) - f(a - h * e)) / (2 * h);
    double ana_re = 2.0 * grad(k, l).real();
    REQUIRE(std::abs(num_re - ana_re) <= 1e-3 * std::max(1.0, std::abs(ana_re)));

    e(k, l) = Complex(0.0, 1.0);
    double num_im = (f(a + h * e) - f(a - h * e)) / (2 * h);
    double ana_im = 2.0 * grad(k, l).imag();
    REQUIRE(std::abs(num_im - ana_im) <= 1e-3 * std::max(1.0, std::abs(ana_im)));
  }
}

TEST_CASE("capacity bounds for the shift") {
  MemoryChannel sh = shift_channel(2);
  BoundReport ee = capacity_bound(sh, 3, CapacitySetting::ee(basis_state(2, 0)),
                                  BoundKind::classical_chi);
  REQUIRE(ee.value_bits_per_use == Catch::Approx(2.0 / 3.0).margin(1e-3));

  BoundReport ab = capacity_bound(sh, 3, CapacitySetting::ab(), BoundKind::classical_chi);
  REQUIRE(ab.value_bits_per_use == Catch::Approx(4.0 / 3.0).margin(1e-3));
  REQUIRE(ab.n == 3);
  REQUIRE_FALSE(ab.optimizer_trace.empty());
}

TEST_CASE("capacity bounds for the switch") {
  MemoryChannel sw = switch_channel({identity_channel(2), depolarizing_channel(2)});
  BoundReport good = capacity_bound(sw, 2, CapacitySetting::eb(basis_state(2, 0)),
                                    BoundKind::classical_chi);
  REQUIRE(good.value_bits_per_use == Catch::Approx(1.0).margin(1e-3));

  BoundReport bad = capacity_bound(sw, 2, CapacitySetting::eb(basis_state(2, 1)),
                                   BoundKind::classical_chi);
  REQUIRE(bad.value_bits_per_use <= 1e-3);

  REQUIRE_THROWS_AS(effective_channel(sw, 1, CapacitySetting{MemoryHolder::eve,
                                                             FinalReader::bob, {}}),
                    validation_error);
}

TEST_CASE("fannes and data processing checks") {
  DensityMatrix rho = maximally_mixed(2);
  FannesCheck same = check_fannes(rho, rho);
  REQUIRE(same.lhs == 0.0);
  REQUIRE(same.holds);

  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    FannesCheck c = check_fannes(rng.density(2, 2), rng.density(2, 2));
    REQUIRE(c.holds);
  }
  for (int t = 0; t < 20; ++t) {
    Channel s = random_channel(rng, 3, 2, 2);
    Channel post = random_channel(rng, 2, 2, 2);
    DpiCheck c = check_dpi(post, s, rng.density(3, 2));
    REQUIRE(c.holds);
  }
}

TEST_CASE("memory-drop chi sandwich") {
  MemoryChannel sh = shift_channel(2);
  SandwichCheck c = sandwich_check(sh, 2, basis_ensemble(8));
  REQUIRE(c.holds);
  REQUIRE(c.mid - c.lower <= 2.0 * std::log2(2.0) + 1e-9);
  REQUIRE(c.upper == Catch::Approx(c.lower + 2.0).margin(1e-12));
}

TEST_CASE("ensemble validation") {
  REQUIRE_THROWS_AS(Ensemble::make({0.5, 0.4}, {basis_state(2, 0), basis_state(2, 1)}),
                    validation_error);
  REQUIRE_THROWS_AS(Ensemble::make({1.0}, {}), validation_error);
  REQUIRE_THROWS_AS(Ensemble::make({0.5, 0.5}, {basis_state(2, 0), basis_state(3, 1)}),
                    validation_error);
}
