#pragma once

#include <optional>
#include <set>
#include <vector>

#include "memchan/diamond.hpp"
#include "memchan/entropy.hpp"
#include "memchan/forgetful.hpp"

namespace memchan {

// Smallest m at which replacing the memory input by the flat state changes
// nothing: diamond(S_m - S_m o (reset (x) id)) <= tol.
inline std::optional<int> strictly_forgetful_depth(const MemoryChannel& mc, int m_max,
                                                   double tol = 1e-6,
                                                   const DiamondOptions& opt = {}) {
  for (int m = 1; m <= m_max; ++m)
    if (dn_estimate(mc, m, opt) <= tol) return m;
  return std::nullopt;
}

// Memory evolution across m guard steps fed with omega: rho_M -> tr_B S_m(rho (x) omega).
inline Channel guard_memory_map(const MemoryChannel& mc, int m, const DensityMatrix& omega) {
  MemoryChannel sm = concatenate(mc, m);
  if (omega.dim() != sm.dA) throw dimension_error("guard_memory_map: omega dim mismatch");
  return compose(trace_out_channel(sm.dB, mc.dM, 0),
                 compose(sm.step, append_state_channel(omega, mc.dM)));
}

struct BlockReduction {
  int m = 0;
  int l = 0;
  Channel reduced;                 // A^l -> B^l with the settled memory fed in
  double error_rate_per_block = 0.0;
  bool error_converged = true;
  long error_iterations = 0;
  DensityMatrix post_guard_memory;
  MemoryChannel block;             // guard-fixed block, M (x) A^l -> B^l (x) M
  MemoryChannel surrogate;         // same shape, memory input discarded
};

// Groups m guard steps (inputs pinned to omega, outputs ignored) with an
// l-step payload, and compares the resulting block map against the
// memoryless surrogate that forgets the incoming memory state.
inline BlockReduction block_reduce(const MemoryChannel& mc, int m, int l,
                                   std::optional<DensityMatrix> omega = {},
                                   const DiamondOptions& opt = {}) {
  if (m < 1 || l < 1) throw validation_error("block_reduce: need m, l >= 1");
  MemoryChannel sl = concatenate(mc, l);
  long dAm = 1;
  for (int i = 0; i < m; ++i) dAm *= mc.dA;
  DensityMatrix guard = omega ? *omega : maximally_mixed(dAm);

  Channel evolve = guard_memory_map(mc, m, guard);
  CMatrix settled = schrodinger_apply(evolve, maximally_mixed(mc.dM).mat);

  BlockReduction br;
  br.m = m;
  br.l = l;
  br.post_guard_memory = DensityMatrix::make(project_to_density(settled));

  long dAl = sl.step.d_in / mc.dM;
  Channel true_block = compose(sl.step, tensor_channels(evolve, identity_channel(dAl)));
  Channel reset_block = compose(
      sl.step,
      tensor_channels(constant_channel(mc.dM, br.post_guard_memory), identity_channel(dAl)));
  br.block = MemoryChannel::make(sl.dA, sl.dB, mc.dM, true_block.kraus);
  br.surrogate = MemoryChannel::make(sl.dA, sl.dB, mc.dM, reset_block.kraus);
  DiamondResult dr = diamond_norm(map_difference(br.block.step, br.surrogate.step), opt);
  br.error_rate_per_block = dr.value;
  br.error_converged = dr.converged;
  br.error_iterations = dr.iterations;
  br.reduced = fix_memory_input(mc, br.post_guard_memory, l);
  return br;
}

inline double concat_error_bound(int n, int m, double c) {
  if (n < 1 || m < 1 || c <= 0.0) throw validation_error("concat_error_bound: bad arguments");
  return n * std::pow(c, -double(m));
}

struct ConcatErrorCheck {
  double empirical = 0.0;
  double per_block = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// Concatenates n guard-fixed blocks and their surrogates and checks that
// the joint deviation stays below n times the single-block error.
inline ConcatErrorCheck concat_error_verify(const MemoryChannel& mc, int n, int m, int l,
                                            const DiamondOptions& opt = {}) {
  BlockReduction br = block_reduce(mc, m, l, {}, opt);
  ConcatErrorCheck c;
  c.per_block = br.error_rate_per_block;
  c.bound = n * br.error_rate_per_block;
  MemoryChannel chain = concatenate(br.block, n);
  MemoryChannel chain_tilde = concatenate(br.surrogate, n);
  c.empirical = diamond_norm(map_difference(chain.step, chain_tilde.step), opt).value;
  c.holds = c.empirical <= c.bound + 1e-6;
  return c;
}

struct RateSandwich {
  double lower = 0.0;
  double upper = 0.0;
  double chi_block = 0.0;         // payload block with memory legs open
  double traced_lower = 0.0;
  double traced_upper = 0.0;
  double chi_traced = 0.0;        // memory fed flat and traced out
};

// Achievable-rate bracket for guard length m and payload length l:
// chi(payload)/(l+m) - 2m/(m+l) ld dB <= R <= chi(payload)/l.  The payload
// objective is computed with open memory legs and, for comparison, with the
// memory pinned and discarded.
inline RateSandwich rate_sandwich(const MemoryChannel& mc, int m, int l, int restarts = 2,
                                  std::uint64_t seed = 0, int iter_cap = 150) {
  if (m < 1 || l < 1) throw validation_error("rate_sandwich: need m, l >= 1");
  auto run = [&](const Channel& ch) {
    int n_states = static_cast<int>(std::min<long>(ch.d_in * ch.d_in, ch.d_in + 2));
    return maximize_chi(ch, n_states, restarts, seed, iter_cap).value;
  };
  RateSandwich rs;
  rs.chi_block = run(effective_channel(mc, l, CapacitySetting::ab()));
  rs.chi_traced = run(effective_channel(mc, l, CapacitySetting::ee(maximally_mixed(mc.dM))));

  double penalty = 2.0 * m / double(m + l) * std::log2(double(mc.dB));
  rs.lower = rs.chi_block / double(l + m) - penalty;
  rs.upper = rs.chi_block / double(l);
  rs.traced_lower = rs.chi_traced / double(l + m) - penalty;
  rs.traced_upper = rs.chi_traced / double(l);
  return rs;
}

// Largest over j of || mean_k ch(rho_jk) - global mean ||_1; zero means the
// k-randomized transmissions look identical from the channel's output side.
inline double privacy_deviation(const Channel& ch,
                                const std::vector<std::vector<DensityMatrix>>& codewords) {
  if (codewords.empty() || codewords[0].empty())
    throw validation_error("privacy_deviation: empty codeword grid");
  std::size_t cols = codewords[0].size();
  CMatrix theta = CMatrix::Zero(ch.d_out, ch.d_out);
  std::vector<CMatrix> row_means;
  for (const auto& row : codewords) {
    if (row.size() != cols) throw validation_error("privacy_deviation: ragged grid");
    CMatrix mean = CMatrix::Zero(ch.d_out, ch.d_out);
    for (const auto& rho : row) {
      if (rho.dim() != ch.d_in) throw dimension_error("privacy_deviation: codeword dim");
      mean += schrodinger_apply(ch, rho.mat);
    }
    mean /= double(cols);
    theta += mean;
    row_means.push_back(std::move(mean));
  }
  theta /= double(codewords.size());
  double worst = 0.0;
  for (const auto& mean : row_means) worst = std::max(worst, trace_norm(mean - theta));
  return worst;
}

// Monte Carlo transmission experiment: random product codebooks drawn from
// a chi-maximizing single-letter ensemble, decoded with the square-root
// measurement.  Returns the mean success probability over trials.
inline double random_code_sim(const Channel& ch, int n, double rate, int trials = 8,
                              std::uint64_t seed = 0) {
  if (n < 1 || trials < 1) throw validation_error("random_code_sim: need n, trials >= 1");
  double din_n = std::pow(double(ch.d_in), n), dout_n = std::pow(double(ch.d_out), n);
  check_dim(static_cast<long>(din_n), "random_code_sim");
  check_dim(static_cast<long>(dout_n), "random_code_sim");
  long nu = static_cast<long>(std::floor(std::exp2(n * rate)));
  if (nu < 2) throw validation_error("random_code_sim: fewer than two codewords");

  // a lean letter alphabet keeps distinguishable codewords distinguishable
  ChiResult cr = maximize_chi(ch, static_cast<int>(ch.d_in), 2, seed, 60);
  std::vector<double> probs;
  std::vector<CMatrix> letter_out;
  for (std::size_t i = 0; i < cr.ensemble.probs.size(); ++i) {
    if (cr.ensemble.probs[i] <= 1e-9) continue;
    probs.push_back(cr.ensemble.probs[i]);
    letter_out.push_back(schrodinger_apply(ch, cr.ensemble.states[i].mat));
  }
  double total = 0.0;
  for (double p : probs) total += p;
  for (double& p : probs) p /= total;

  double success_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(seed * 1000003ull + static_cast<std::uint64_t>(t) + 1ull);
    auto draw_letter = [&]() {
      double u = static_cast<double>(rng.integer(1ull << 53)) / double(1ull << 53);
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
      }
      return probs.size() - 1;
    };

    // draw distinct strings while possible; duplicates only when the
    // codebook outgrows the reachable strings
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::vector<std::size_t>> strings;
    long attempts = 0, cap = 64 * nu;
    while (static_cast<long>(strings.size()) < nu) {
      std::vector<std::size_t> s(n);
      for (int i = 0; i < n; ++i) s[i] = draw_letter();
      if (seen.insert(s).second || ++attempts > cap) strings.push_back(std::move(s));
    }

    std::vector<CMatrix> outputs;
    CMatrix ybar = CMatrix::Zero(static_cast<long>(dout_n), static_cast<long>(dout_n));
    for (const auto& s : strings) {
      CMatrix y = letter_out[s[0]];
      for (int i = 1; i < n; ++i) y = tensor(y, letter_out[s[i]]);
      ybar += y / double(nu);
      outputs.push_back(std::move(y));
    }

    EigH e = eig_hermitian(ybar);
    CVector inv_sqrt(e.values.size());
    for (long i = 0; i < e.values.size(); ++i)
      inv_sqrt(i) = e.values(i) > 1e-12 ? 1.0 / std::sqrt(e.values(i)) : 0.0;
    CMatrix root = e.vectors * inv_sqrt.asDiagonal() * e.vectors.adjoint();

    double success = 0.0;
    for (const auto& y : outputs) {
      CMatrix half = root * y;
      success += (half * half).trace().real() / double(nu);
    }
    success_sum += success / double(nu);
  }
  return success_sum / double(trials);
}

}  // namespace memchan
