#pragma once

#include <vector>

#include "memchan/channel.hpp"
#include "memchan/rng.hpp"

namespace memchan {

// A channel over a finite chain of sites, one input and one output register
// per site.  Stored in the Schrodinger direction (inputs A^n -> outputs B^n);
// causality statements are checked on observables via heisenberg_apply.
struct WindowChannel {
  int n_sites = 0;
  long d_site_in = 0;   // per-site input dimension
  long d_site_out = 0;  // per-site output dimension
  Channel channel;

  static WindowChannel make(int n_sites, long d_site_in, long d_site_out, Channel ch) {
    if (n_sites < 1) throw validation_error("WindowChannel: need at least one site");
    long din = 1, dout = 1;
    for (int i = 0; i < n_sites; ++i) {
      din *= d_site_in;
      dout *= d_site_out;
    }
    if (ch.d_in != din || ch.d_out != dout)
      throw dimension_error("WindowChannel: channel dims do not match the site grid");
    return WindowChannel{n_sites, d_site_in, d_site_out, std::move(ch)};
  }
};

struct CutCheck {
  double deviation = 0.0;
  bool basis_complete = false;
  int samples_used = 0;
};

// Checks that observables supported on output sites 1..z pull back to
// observables supported on input sites 1..z: the trailing input factors of
// T(b (x) 1) must carry nothing but identity.  The candidate factor is
// extracted by a normalized partial trace; any mismatch registers in
// operator norm.  Small site counts get a complete Hermitian operator
// basis, larger ones random Hermitian samples.
inline CutCheck causal_cut_check(const WindowChannel& wc, int z, int samples = 32,
                                 std::uint64_t seed = 0) {
  if (z < 1 || z >= wc.n_sites) throw validation_error("causal_cut_check: bad cut index");
  long d_lead_out = 1, d_tail_out = 1, d_lead_in = 1, d_tail_in = 1;
  for (int i = 0; i < z; ++i) {
    d_lead_out *= wc.d_site_out;
    d_lead_in *= wc.d_site_in;
  }
  for (int i = z; i < wc.n_sites; ++i) {
    d_tail_out *= wc.d_site_out;
    d_tail_in *= wc.d_site_in;
  }

  CutCheck result;
  result.basis_complete = d_lead_out * d_lead_out <= 4096;

  auto probe = [&](const CMatrix& b) {
    CMatrix x = heisenberg_apply(wc.channel,
                                 CMatrix(tensor(b, CMatrix::Identity(d_tail_out, d_tail_out))));
    CMatrix y = partial_trace(x, {d_lead_in, d_tail_in}, {0}) / double(d_tail_in);
    double dev = operator_norm(CMatrix(x - tensor(y, CMatrix::Identity(d_tail_in, d_tail_in))));
    result.deviation = std::max(result.deviation, dev);
    ++result.samples_used;
  };

  if (result.basis_complete) {
    for (long i = 0; i < d_lead_out; ++i)
      for (long j = i; j < d_lead_out; ++j) {
        CMatrix e = CMatrix::Zero(d_lead_out, d_lead_out);
        if (i == j) {
          e(i, i) = 1.0;
          probe(e);
        } else {
          e(i, j) = e(j, i) = 1.0;
          probe(e);
          e(i, j) = Complex(0, 1);
          e(j, i) = Complex(0, -1);
          probe(e);
        }
      }
  } else {
    Rng rng(seed);
    for (int s = 0; s < samples; ++s) {
      CMatrix g = rng.ginibre(d_lead_out, d_lead_out);
      CMatrix h = 0.5 * (g + g.adjoint());
      probe(CMatrix(h / std::max(operator_norm(h), 1e-12)));
    }
  }
  return result;
}

// The n-step window a memory channel generates: memory initialized to mu,
// final memory discarded.
inline WindowChannel from_memory_channel(const MemoryChannel& mc, int n,
                                         const DensityMatrix& mu) {
  return WindowChannel::make(n, mc.dA, mc.dB, fix_memory_input(mc, mu, n));
}

// Single-site transfer map: every other input fed the flat state, every
// other output traced away.
inline Channel site_marginal(const MemoryChannel& mc, const DensityMatrix& mu, int n, int k) {
  if (k < 1 || k > n) throw validation_error("site_marginal: site index out of range");
  Channel window = fix_memory_input(mc, mu, n);
  long d_lead_in = 1, d_tail_in = 1, d_lead_out = 1, d_tail_out = 1;
  for (int i = 0; i < k - 1; ++i) {
    d_lead_in *= mc.dA;
    d_lead_out *= mc.dB;
  }
  for (int i = k; i < n; ++i) {
    d_tail_in *= mc.dA;
    d_tail_out *= mc.dB;
  }
  Channel embed = identity_channel(mc.dA);
  if (d_tail_in > 1) embed = compose(append_state_channel(maximally_mixed(d_tail_in), mc.dA), embed);
  if (d_lead_in > 1)
    embed = compose(prepend_state_channel(maximally_mixed(d_lead_in), embed.d_out), embed);
  Channel project = identity_channel(window.d_out);
  if (d_tail_out > 1) project = trace_out_channel(d_lead_out * mc.dB, d_tail_out, 1);
  if (d_lead_out > 1)
    project = compose(trace_out_channel(d_lead_out, mc.dB, 0), project);
  return compose(project, compose(window, embed));
}

}  // namespace memchan
