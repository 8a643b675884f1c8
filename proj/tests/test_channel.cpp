#include <catch2/catch_amalgamated.hpp>

#include "memchan/channel.hpp"
#include "memchan/rng.hpp"

using namespace memchan;

namespace {

// Random CPTP channel with k Kraus operators from a Haar isometry.
Channel random_channel(Rng& rng, long d_in, long d_out, long k) {
  while (d_out * k < d_in) ++k;  // an isometry needs room
  CMatrix v = rng.haar_isometry(d_out * k, d_in);
  std::vector<CMatrix> ks;
  for (long e = 0; e < k; ++e) {
    CMatrix m(d_out, d_in);
    for (long o = 0; o < d_out; ++o) m.row(o) = v.row(o * k + e);
    ks.push_back(std::move(m));
  }
  return Channel::make(d_in, d_out, std::move(ks));
}

MemoryChannel random_memory_channel(Rng& rng, long dA, long dB, long dM, long k) {
  Channel ch = random_channel(rng, dM * dA, dB * dM, k);
  return MemoryChannel{dA, dB, dM, std::move(ch)};
}

}  // namespace

TEST_CASE("cptp validation accepts channels and rejects scaled lists") {
  REQUIRE(validate_cptp(identity_channel(3)).first);
  Channel bad{2, 2, {CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)}};
  auto [ok, res] = validate_cptp(bad);
  REQUIRE_FALSE(ok);
  REQUIRE(res == Catch::Approx(1.0));
  Rng rng(3);
  REQUIRE(validate_cptp(random_channel(rng, 3, 4, 2)).first);
}

TEST_CASE("schrodinger and heisenberg actions are trace duals") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    long d_in = 2 + static_cast<long>(rng.integer(3));
    long d_out = 2 + static_cast<long>(rng.integer(3));
    Channel ch = random_channel(rng, d_in, d_out, 1 + static_cast<long>(rng.integer(3)));
    CMatrix rho = rng.density(d_in).mat;
    CMatrix g = rng.ginibre(d_out, d_out);
    CMatrix x = (g + g.adjoint()) / 2.0;
    REQUIRE(duality_residual(ch, rho, x) < 1e-12);
  }
}

TEST_CASE("choi of the identity is the unnormalized entangled projector") {
  CMatrix j = choi(identity_channel(2));
  CMatrix expect = CMatrix::Zero(4, 4);
  // |ii><jj| at rows/cols i*2+i
  expect(0, 0) = expect(0, 3) = expect(3, 0) = expect(3, 3) = 1.0;
  REQUIRE((j - expect).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(std::abs(j.trace().real() - 2.0) < 1e-14);
}

TEST_CASE("choi round trip through kraus_from_choi") {
  Rng rng(7);
  Channel ch = random_channel(rng, 3, 2, 3);
  CMatrix j = choi(ch);
  Channel back{3, 2, kraus_from_choi(j, 3, 2)};
  REQUIRE(choi_distance(ch, back) < 1e-10);
  REQUIRE(validate_cptp(back).first);
}

TEST_CASE("prune_kraus collapses redundant operators") {
  Rng rng(9);
  Channel ch = random_channel(rng, 2, 2, 2);
  std::vector<CMatrix> fat;
  for (const auto& k : ch.kraus) {
    fat.push_back(k / std::sqrt(2.0));
    fat.push_back(k / std::sqrt(2.0));
  }
  auto slim = prune_kraus(fat);
  REQUIRE(slim.size() == 2);
  Channel back{2, 2, slim};
  REQUIRE(choi_distance(ch, back) < 1e-10);
}

TEST_CASE("stinespring dilation is isometric with environment = choi rank") {
  Rng rng(11);
  Channel ch = random_channel(rng, 3, 3, 2);
  IsometryDilation dil = stinespring(ch);
  REQUIRE(dil.d_env == 2);
  REQUIRE((dil.v.adjoint() * dil.v - CMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  CMatrix u = Rng(13).haar_unitary(4);
  IsometryDilation unit = stinespring(Channel::make(4, 4, {u}));
  REQUIRE(unit.d_env == 1);
}

TEST_CASE("complementary channel is the environment marginal of the dilation") {
  Rng rng(15);
  Channel ch = random_channel(rng, 3, 2, 3);
  Channel comp = complementary(ch);
  IsometryDilation dil = stinespring(ch);
  CMatrix rho = rng.density(3).mat;
  CMatrix joint = dil.v * rho * dil.v.adjoint();  // on out (x) env
  CMatrix out_marg = partial_trace(joint, {ch.d_out, dil.d_env}, {0});
  CMatrix env_marg = partial_trace(joint, {ch.d_out, dil.d_env}, {1});
  REQUIRE((out_marg - schrodinger_apply(ch, rho)).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((env_marg - schrodinger_apply(comp, rho)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("builtin frames: stored shift kraus is the identity matrix") {
  MemoryChannel sh = shift_channel(2);
  REQUIRE(sh.step.kraus.size() == 1);
  REQUIRE((sh.step.kraus[0] - CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  MemoryChannel idc = id_memory_channel(2);
  REQUIRE((idc.step.kraus[0] - flip_operator(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shift moves memory to the output and stores the fresh input") {
  Rng rng(17);
  MemoryChannel sh = shift_channel(2);
  CMatrix mu = rng.density(2).mat, rho = rng.density(2).mat;
  CMatrix out = schrodinger_apply(sh.step, tensor(mu, rho));
  REQUIRE((out - tensor(mu, rho)).cwiseAbs().maxCoeff() < 1e-14);  // B = mu, M' = rho
  CMatrix mem = partial_trace(out, {2, 2}, {1});
  REQUIRE((mem - rho).cwiseAbs().maxCoeff() < 1e-13);
  // transparent line: register passes straight through, memory stays
  MemoryChannel idc = id_memory_channel(2);
  CMatrix out2 = schrodinger_apply(idc.step, tensor(mu, rho));
  REQUIRE((out2 - tensor(rho, mu)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("partial flip algebra and endpoints") {
  long d = 2;
  CMatrix f = flip_operator(d);
  for (int g = 0; g <= 100; ++g) {
    double eta = 3.14159265358979323846 * g / 100.0;
    CMatrix u = partial_flip_defining_unitary(eta, d);
    REQUIRE((u * u.adjoint() - CMatrix::Identity(d * d, d * d)).cwiseAbs().maxCoeff() < 1e-12);
    CMatrix delta = u - f;
    double lhs = operator_norm(delta);
    REQUIRE(std::abs(lhs * lhs - 2.0 * (1.0 - std::cos(eta))) < 1e-12);
  }
  REQUIRE(choi_distance(partial_flip(0.0, 2).step, shift_channel(2).step) < 1e-12);
  REQUIRE(choi_distance(partial_flip(3.14159265358979323846 / 2.0, 2).step,
                        id_memory_channel(2).step) < 1e-12);
}

TEST_CASE("mixed shift is the weighted pair of line and delay") {
  MemoryChannel mc = mixed_shift(0.3, 2);
  REQUIRE(mc.step.kraus.size() == 2);
  REQUIRE(validate_cptp(mc.step).first);
  Rng rng(19);
  CMatrix mu = rng.density(2).mat, rho = rng.density(2).mat;
  CMatrix out = schrodinger_apply(mc.step, tensor(mu, rho));
  CMatrix expect = 0.3 * tensor(rho, mu) + 0.7 * tensor(mu, rho);
  REQUIRE((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("switch reads the memory and applies the selected component") {
  std::vector<Channel> comps = {identity_channel(2), depolarizing_channel(2)};
  MemoryChannel sw = switch_channel(comps);
  REQUIRE(validate_cptp(sw.step).first);
  Rng rng(21);
  CMatrix rho = rng.density(2).mat;
  CMatrix out0 = schrodinger_apply(sw.step, tensor(basis_state(2, 0).mat, rho));
  REQUIRE((out0 - tensor(rho, basis_state(2, 0).mat)).cwiseAbs().maxCoeff() < 1e-12);
  CMatrix out1 = schrodinger_apply(sw.step, tensor(basis_state(2, 1).mat, rho));
  REQUIRE((out1 - tensor(maximally_mixed(2).mat, basis_state(2, 1).mat)).cwiseAbs().maxCoeff() <
          1e-12);
  // coherences in the switch basis decohere
  CMatrix plus(2, 2);
  plus << 0.5, 0.5, 0.5, 0.5;
  CMatrix outp = schrodinger_apply(sw.step, tensor(plus, rho));
  CMatrix mem = partial_trace(outp, {2, 2}, {1});
  REQUIRE(std::abs(mem(0, 1)) < 1e-12);
}

TEST_CASE("concatenate: one step reproduces the base channel") {
  Rng rng(23);
  MemoryChannel mc = random_memory_channel(rng, 2, 3, 2, 2);
  MemoryChannel s1 = concatenate(mc, 1);
  REQUIRE(choi_distance(s1.step, mc.step) < 1e-10);
}

TEST_CASE("concatenate: shift over three steps is a pure delay line") {
  MemoryChannel s3 = concatenate(shift_channel(2), 3);
  REQUIRE(s3.step.kraus.size() == 1);
  Rng rng(25);
  CMatrix mu = rng.density(2).mat;
  std::vector<CMatrix> regs = {rng.density(2).mat, rng.density(2).mat, rng.density(2).mat};
  CMatrix in = tensor({mu, regs[0], regs[1], regs[2]});
  CMatrix out = schrodinger_apply(s3.step, in);
  CMatrix expect = tensor({mu, regs[0], regs[1], regs[2]});  // same flat layout, shifted roles
  REQUIRE((out - expect).cwiseAbs().maxCoeff() < 1e-12);
  CMatrix b_part = partial_trace(out, {2, 2, 2, 2}, {0, 1, 2});
  REQUIRE((b_part - tensor({mu, regs[0], regs[1]})).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("concatenate agrees with stepwise application") {
  Rng rng(27);
  MemoryChannel mc = random_memory_channel(rng, 2, 2, 2, 2);
  MemoryChannel s2 = concatenate(mc, 2);
  REQUIRE(validate_cptp(s2.step, 1e-8).first);
  // independent route: lift the step with tensor_channels and chain applies
  Channel step1 = tensor_channels(mc.step, identity_channel(2));   // M A1 A2 -> B1 M A2
  Channel step2 = tensor_channels(identity_channel(2), mc.step);   // B1 M A2 -> B1 B2 M
  CMatrix x = rng.density(8).mat;
  CMatrix direct = schrodinger_apply(s2.step, x);
  CMatrix chained = schrodinger_apply(step2, schrodinger_apply(step1, x));
  REQUIRE((direct - chained).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("restriction traces every register output") {
  Rng rng(29);
  MemoryChannel mc = random_memory_channel(rng, 2, 2, 2, 2);
  int n = 2;
  Channel hat = restrict_ignore_outputs(mc, n);
  REQUIRE(hat.d_out == 2);
  MemoryChannel sn = concatenate(mc, n);
  CMatrix x = rng.density(8).mat;
  CMatrix want = partial_trace(schrodinger_apply(sn.step, x), {2, 2, 2}, {2});
  CMatrix got = schrodinger_apply(hat, x);
  REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-11);
  // shift: the surviving memory is exactly the last register input
  Channel hat_shift = restrict_ignore_outputs(shift_channel(2), 2);
  CMatrix mu = rng.density(2).mat, r1 = rng.density(2).mat, r2 = rng.density(2).mat;
  CMatrix out = schrodinger_apply(hat_shift, tensor({mu, r1, r2}));
  REQUIRE((out - r2).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("fix_memory_input matches the feed-and-trace oracle") {
  Rng rng(31);
  MemoryChannel mc = random_memory_channel(rng, 2, 2, 2, 2);
  DensityMatrix mu = rng.density(2);
  int n = 2;
  Channel fixed = fix_memory_input(mc, mu, n);
  MemoryChannel sn = concatenate(mc, n);
  CMatrix rho = rng.density(4).mat;
  CMatrix want =
      partial_trace(schrodinger_apply(sn.step, tensor(mu.mat, rho)), {2, 2, 2}, {0, 1});
  CMatrix got = schrodinger_apply(fixed, rho);
  REQUIRE((got - want).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("fix_memory_input on a pure channel needs at most dM^2 kraus") {
  DensityMatrix mix = maximally_mixed(2);
  for (int n = 1; n <= 4; ++n) {
    Channel fixed = fix_memory_input(partial_flip(0.7, 2), mix, n);
    REQUIRE(fixed.kraus.size() <= 4);
    REQUIRE(validate_cptp(fixed, 1e-8).first);
  }
  // shift with fixed memory forwards mu then the first n-1 inputs
  Rng rng(33);
  Channel sh2 = fix_memory_input(shift_channel(2), maximally_mixed(2), 2);
  CMatrix r1 = rng.density(2).mat, r2 = rng.density(2).mat;
  CMatrix out = schrodinger_apply(sh2, tensor(r1, r2));
  REQUIRE((out - tensor(maximally_mixed(2).mat, r1)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("memoryless embedding concatenates to a tensor power") {
  Rng rng(35);
  Channel ch = random_channel(rng, 2, 2, 2);
  MemoryChannel mc = embed_memoryless(ch);
  MemoryChannel s2 = concatenate(mc, 2);
  Channel want = tensor_channels(ch, ch);
  REQUIRE(choi_distance(s2.step, want) < 1e-10);
}

TEST_CASE("depolarize_mix endpoints") {
  Rng rng(37);
  MemoryChannel mc = random_memory_channel(rng, 2, 2, 2, 2);
  MemoryChannel eps0 = depolarize_mix(mc, 0.0);
  REQUIRE(choi_distance(eps0.step, mc.step) < 1e-12);
  DensityMatrix delta = rng.density(4);
  MemoryChannel eps1 = depolarize_mix(mc, 1.0, delta);
  CMatrix out = schrodinger_apply(eps1.step, rng.density(4).mat);
  REQUIRE((out - delta.mat).cwiseAbs().maxCoeff() < 1e-11);
  MemoryChannel half = depolarize_mix(mc, 0.5, delta);
  REQUIRE(validate_cptp(half.step).first);
  CMatrix rho = rng.density(4).mat;
  CMatrix mixed = schrodinger_apply(half.step, rho);
  CMatrix expect = 0.5 * schrodinger_apply(mc.step, rho) + 0.5 * delta.mat;
  REQUIRE((mixed - expect).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("concatenation of cptp maps stays cptp with bounded kraus count") {
  Rng rng(39);
  for (int trial = 0; trial < 5; ++trial) {
    MemoryChannel mc = random_memory_channel(rng, 2, 2, 2, 3);
    MemoryChannel s3 = concatenate(mc, 3);
    auto [ok, res] = validate_cptp(s3.step, 1e-8);
    REQUIRE(ok);
    REQUIRE(static_cast<long>(s3.step.kraus.size()) <= s3.step.d_in * s3.step.d_out);
  }
}
