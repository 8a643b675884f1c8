#pragma once

#include <optional>

#include "matrix.hpp"

namespace memchan {

//==========================================================================
// channels in Kraus form
//==========================================================================

// One Kraus list serves both pictures: states map as sum K rho K^dagger
// (Schrodinger, d_in -> d_out) and observables as sum K^dagger X K
// (Heisenberg, d_out -> d_in).  Trace preservation = sum K^dagger K == 1.
struct Channel {
  long d_in = 0;
  long d_out = 0;
  std::vector<CMatrix> kraus;

  static Channel make(long d_in, long d_out, std::vector<CMatrix> ks, double tol = kHermTol);
};

inline double cptp_residual(const Channel& ch) {
  CMatrix acc = CMatrix::Zero(ch.d_in, ch.d_in);
  for (const auto& k : ch.kraus) acc += k.adjoint() * k;
  return operator_norm(acc - CMatrix::Identity(ch.d_in, ch.d_in));
}

inline std::pair<bool, double> validate_cptp(const Channel& ch, double tol = kHermTol) {
  for (const auto& k : ch.kraus) {
    if (k.rows() != ch.d_out || k.cols() != ch.d_in || !is_finite(k)) return {false, 1.0 / 0.0};
  }
  double r = cptp_residual(ch);
  return {r <= tol, r};
}

inline Channel Channel::make(long d_in, long d_out, std::vector<CMatrix> ks, double tol) {
  if (d_in <= 0 || d_out <= 0 || ks.empty()) throw validation_error("channel: empty kraus list");
  check_dim(d_in, "channel");
  check_dim(d_out, "channel");
  Channel ch{d_in, d_out, std::move(ks)};
  auto [ok, res] = validate_cptp(ch, tol);
  if (!ok)
    throw validation_error("channel: kraus list not trace preserving (residual " +
                           std::to_string(res) + ")");
  return ch;
}

inline CMatrix schrodinger_apply(const Channel& ch, const CMatrix& rho) {
  CMatrix out = CMatrix::Zero(ch.d_out, ch.d_out);
  for (const auto& k : ch.kraus) out += k * rho * k.adjoint();
  return out;
}

inline CMatrix heisenberg_apply(const Channel& ch, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(ch.d_in, ch.d_in);
  for (const auto& k : ch.kraus) out += k.adjoint() * x * k;
  return out;
}

inline double duality_residual(const Channel& ch, const CMatrix& rho, const CMatrix& x) {
  Complex lhs = (schrodinger_apply(ch, rho) * x).trace();
  Complex rhs = (rho * heisenberg_apply(ch, x)).trace();
  return std::abs(lhs - rhs);
}

//==========================================================================
// Choi matrix and Kraus recovery
//==========================================================================

// vec with input-major flattening: vec(K)[i * d_out + o] = K(o, i), matching
// the Choi ordering J = sum_ij |i><j| (x) Phi(|i><j|) on H_in (x) H_out.
inline CVector kraus_vec(const CMatrix& k) {
  long d_out = k.rows(), d_in = k.cols();
  CVector v(d_in * d_out);
  for (long i = 0; i < d_in; ++i)
    for (long o = 0; o < d_out; ++o) v(i * d_out + o) = k(o, i);
  return v;
}

inline CMatrix kraus_unvec(const CVector& v, long d_in, long d_out) {
  CMatrix k(d_out, d_in);
  for (long i = 0; i < d_in; ++i)
    for (long o = 0; o < d_out; ++o) k(o, i) = v(i * d_out + o);
  return k;
}

// J = sum_ij |i><j| (x) Phi(|i><j|); tr J = d_in for a channel.  With this
// convention choi(identity on C^d) = sum_ij |ii><jj| (the unnormalized
// maximally entangled projector).
inline CMatrix choi(const Channel& ch) {
  long D = ch.d_in * ch.d_out;
  check_dim(D, "choi");
  CMatrix j = CMatrix::Zero(D, D);
  for (const auto& k : ch.kraus) {
    CVector v = kraus_vec(k);
    j += v * v.adjoint();
  }
  return j;
}

inline std::vector<CMatrix> kraus_from_choi(const CMatrix& j, long d_in, long d_out,
                                            double threshold = 1e-12) {
  if (j.rows() != d_in * d_out) throw validation_error("kraus_from_choi: dims mismatch");
  EigH e = eig_hermitian(j, 1e-7);
  if (e.values.size() > 0 && e.values.minCoeff() < -1e-7)
    throw validation_error("kraus_from_choi: choi matrix not positive");
  std::vector<CMatrix> ks;
  for (long i = 0; i < e.values.size(); ++i) {
    if (e.values(i) <= threshold) continue;
    ks.push_back(std::sqrt(e.values(i)) * kraus_unvec(e.vectors.col(i), d_in, d_out));
  }
  if (ks.empty()) ks.push_back(CMatrix::Zero(d_out, d_in));
  return ks;
}

// Reduce a Kraus list to Choi rank.  Done in the Gram basis when the list is
// shorter than the Choi dimension: the nonzero spectrum of the Gram matrix
// G_ij = tr(K_i^dagger K_j) equals the Choi spectrum, so thresholding there
// is the same cut at far lower cost.
inline std::vector<CMatrix> prune_kraus(const std::vector<CMatrix>& ks, double threshold = 1e-12) {
  if (ks.size() <= 1) return ks;
  long d_out = ks[0].rows(), d_in = ks[0].cols();
  long k = static_cast<long>(ks.size());
  if (k > d_in * d_out) {
    CMatrix j = CMatrix::Zero(d_in * d_out, d_in * d_out);
    for (const auto& m : ks) {
      CVector v = kraus_vec(m);
      j += v * v.adjoint();
    }
    return kraus_from_choi(j, d_in, d_out, threshold);
  }
  CMatrix g(k, k);
  for (long i = 0; i < k; ++i)
    for (long l = i; l < k; ++l) {
      g(i, l) = (ks[i].adjoint() * ks[l]).trace();
      g(l, i) = std::conj(g(i, l));
    }
  EigH e = eig_hermitian(g, 1e-7);
  std::vector<CMatrix> out;
  for (long c = 0; c < k; ++c) {
    if (e.values(c) <= threshold) continue;
    CMatrix m = CMatrix::Zero(d_out, d_in);
    for (long i = 0; i < k; ++i) m += e.vectors(i, c) * ks[i];
    out.push_back(std::move(m));
  }
  if (out.empty()) out.push_back(CMatrix::Zero(d_out, d_in));
  return out;
}

inline Channel prune(const Channel& ch, double threshold = 1e-12) {
  return Channel{ch.d_in, ch.d_out, prune_kraus(ch.kraus, threshold)};
}

//==========================================================================
// composition helpers
//==========================================================================

inline Channel compose(const Channel& outer, const Channel& inner, double threshold = 1e-12) {
  if (inner.d_out != outer.d_in) throw validation_error("compose: dims mismatch");
  std::vector<CMatrix> ks;
  ks.reserve(outer.kraus.size() * inner.kraus.size());
  for (const auto& a : outer.kraus)
    for (const auto& b : inner.kraus) ks.push_back(a * b);
  if (ks.size() > 16) ks = prune_kraus(ks, threshold);
  return Channel{inner.d_in, outer.d_out, std::move(ks)};
}

inline Channel tensor_channels(const Channel& a, const Channel& b, double threshold = 1e-12) {
  std::vector<CMatrix> ks;
  ks.reserve(a.kraus.size() * b.kraus.size());
  for (const auto& ka : a.kraus)
    for (const auto& kb : b.kraus) ks.push_back(tensor(ka, kb));
  if (ks.size() > 64) ks = prune_kraus(ks, threshold);
  return Channel{a.d_in * b.d_in, a.d_out * b.d_out, std::move(ks)};
}

inline Channel identity_channel(long d) { return Channel{d, d, {CMatrix::Identity(d, d)}}; }

// Fully depolarizing: rho -> tr(rho) 1/d.
inline Channel depolarizing_channel(long d) {
  std::vector<CMatrix> ks;
  double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      CMatrix k = CMatrix::Zero(d, d);
      k(i, j) = s;
      ks.push_back(std::move(k));
    }
  return Channel{d, d, std::move(ks)};
}

// Trace out the factor `which` of a bipartite output d1 (x) d2.
inline Channel trace_out_channel(long d1, long d2, int which) {
  std::vector<CMatrix> ks;
  if (which == 0) {  // keep second factor
    for (long b = 0; b < d1; ++b) {
      CMatrix k = CMatrix::Zero(d2, d1 * d2);
      k.block(0, b * d2, d2, d2) = CMatrix::Identity(d2, d2);
      ks.push_back(std::move(k));
    }
    return Channel{d1 * d2, d2, std::move(ks)};
  }
  for (long b = 0; b < d2; ++b) {  // keep first factor
    CMatrix k = CMatrix::Zero(d1, d1 * d2);
    for (long i = 0; i < d1; ++i) k(i, i * d2 + b) = 1.0;
    ks.push_back(std::move(k));
  }
  return Channel{d1 * d2, d1, std::move(ks)};
}

// rho -> mu (x) rho, with mu appended on the left.
inline Channel prepend_state_channel(const DensityMatrix& mu, long d) {
  EigH e = eig_hermitian(mu.mat);
  std::vector<CMatrix> ks;
  for (long b = 0; b < e.values.size(); ++b) {
    double lam = std::max(0.0, e.values(b));
    if (lam <= 1e-15) continue;
    CMatrix k = CMatrix::Zero(mu.dim() * d, d);
    for (long m = 0; m < mu.dim(); ++m)
      k.block(m * d, 0, d, d) = std::sqrt(lam) * e.vectors(m, b) * CMatrix::Identity(d, d);
    ks.push_back(std::move(k));
  }
  return Channel{d, mu.dim() * d, std::move(ks)};
}

// rho -> rho (x) sigma, with sigma appended on the right.
inline Channel append_state_channel(const DensityMatrix& sigma, long d) {
  EigH e = eig_hermitian(sigma.mat);
  std::vector<CMatrix> ks;
  for (long b = 0; b < e.values.size(); ++b) {
    double lam = std::max(0.0, e.values(b));
    if (lam <= 1e-15) continue;
    CMatrix k = CMatrix::Zero(d * sigma.dim(), d);
    for (long i = 0; i < d; ++i)
      for (long m = 0; m < sigma.dim(); ++m)
        k(i * sigma.dim() + m, i) = std::sqrt(lam) * e.vectors(m, b);
    ks.push_back(std::move(k));
  }
  return Channel{d, d * sigma.dim(), std::move(ks)};
}

// rho -> tr(rho) sigma
inline Channel constant_channel(long d_in, const DensityMatrix& sigma) {
  EigH e = eig_hermitian(sigma.mat);
  std::vector<CMatrix> ks;
  for (long b = 0; b < e.values.size(); ++b) {
    double lam = std::max(0.0, e.values(b));
    if (lam <= 1e-15) continue;
    for (long i = 0; i < d_in; ++i) {
      CMatrix k = CMatrix::Zero(sigma.dim(), d_in);
      k.col(i) = std::sqrt(lam) * e.vectors.col(b);
      ks.push_back(std::move(k));
    }
  }
  return Channel{d_in, sigma.dim(), std::move(ks)};
}

//==========================================================================
// Stinespring dilation and the complementary channel
//==========================================================================

struct IsometryDilation {
  CMatrix v;   // (d_out * d_env) x d_in, ordering out (x) env
  long d_env = 0;
};

inline IsometryDilation stinespring(const Channel& ch, double threshold = 1e-12) {
  std::vector<CMatrix> ks = prune_kraus(ch.kraus, threshold);
  long d_env = static_cast<long>(ks.size());
  CMatrix v(ch.d_out * d_env, ch.d_in);
  for (long e = 0; e < d_env; ++e)
    for (long o = 0; o < ch.d_out; ++o) v.row(o * d_env + e) = ks[e].row(o);
  return IsometryDilation{std::move(v), d_env};
}

// Same dilation, environment kept instead of the output.
inline Channel complementary(const Channel& ch, double threshold = 1e-12) {
  IsometryDilation dil = stinespring(ch, threshold);
  std::vector<CMatrix> ks;
  for (long o = 0; o < ch.d_out; ++o) {
    CMatrix k(dil.d_env, ch.d_in);
    for (long e = 0; e < dil.d_env; ++e) k.row(e) = dil.v.row(o * dil.d_env + e);
    ks.push_back(std::move(k));
  }
  return Channel{ch.d_in, dil.d_env, std::move(ks)};
}

//==========================================================================
// memory channels
//==========================================================================

// Stored Schrodinger-forward: states on M (x) A map to states on B (x) M.
// Memory is the leftmost input factor and the rightmost output factor.
struct MemoryChannel {
  long dA = 0, dB = 0, dM = 0;
  Channel step;

  static MemoryChannel make(long dA, long dB, long dM, std::vector<CMatrix> ks,
                            double tol = kHermTol) {
    Channel ch = Channel::make(dM * dA, dB * dM, std::move(ks), tol);
    return MemoryChannel{dA, dB, dM, std::move(ch)};
  }
};

// n-fold concatenation S_n : M (x) A^n -> B^n (x) M.  The memory wire is
// threaded step to step; register wires keep their time order on both sides.
inline MemoryChannel concatenate(const MemoryChannel& mc, int n, double threshold = 1e-12) {
  if (n < 1) throw validation_error("concatenate: n must be >= 1");
  long dA = mc.dA, dB = mc.dB, dM = mc.dM;
  double powA = std::pow(static_cast<double>(dA), n);
  double powB = std::pow(static_cast<double>(dB), n);
  if (dM * powA > static_cast<double>(max_dim()) || powB * dM > static_cast<double>(max_dim()))
    throw dimension_error("concatenate: n-step spaces exceed dimension ceiling");

  long dAn = static_cast<long>(powA + 0.5);
  std::vector<CMatrix> acc = {CMatrix::Identity(dM * dAn, dM * dAn)};
  long trailing = dAn;  // registers not yet consumed
  long leading = 1;     // outputs already produced
  for (int t = 0; t < n; ++t) {
    trailing /= dA;
    std::vector<CMatrix> next;
    next.reserve(acc.size() * mc.step.kraus.size());
    CMatrix il = CMatrix::Identity(leading, leading);
    CMatrix ir = CMatrix::Identity(trailing, trailing);
    for (const auto& k : mc.step.kraus) {
      CMatrix lift = tensor(tensor(il, k), ir);
      for (const auto& a : acc) next.push_back(lift * a);
    }
    leading *= dB;
    long rank_cap = (dM * leading) * (dB * dM);  // active-leg Choi rank bound
    if (static_cast<long>(next.size()) > std::max(rank_cap, 64L))
      next = prune_kraus(next, threshold);
    acc = std::move(next);
  }
  if (acc.size() > 1) acc = prune_kraus(acc, threshold);
  long dBn = leading;
  return MemoryChannel{dAn, dBn, dM, Channel{dM * dAn, dBn * dM, std::move(acc)}};
}

// Restriction to the memory evolution: tr_{B^n} after S_n, a Schrodinger map
// M (x) A^n -> M.
inline Channel restrict_ignore_outputs(const MemoryChannel& mc, int n, double threshold = 1e-12) {
  MemoryChannel sn = concatenate(mc, n, threshold);
  long dBn = sn.dB;
  std::vector<CMatrix> ks;
  ks.reserve(sn.step.kraus.size() * dBn);
  for (const auto& k : sn.step.kraus)
    for (long b = 0; b < dBn; ++b) ks.push_back(k.block(b * mc.dM, 0, mc.dM, sn.step.d_in));
  ks = prune_kraus(ks, threshold);
  return Channel{sn.step.d_in, mc.dM, std::move(ks)};
}

// Memory input fixed to mu, outputs kept, final memory traced out:
// A^n -> B^n.  For a pure channel the list has at most dM^2 members
// (sqrt(mu_beta) V_{alpha,beta} over the mu eigenbasis).
inline Channel fix_memory_input(const MemoryChannel& mc, const DensityMatrix& mu, int n,
                                double threshold = 1e-12) {
  if (mu.dim() != mc.dM) throw validation_error("fix_memory_input: mu has wrong dimension");
  MemoryChannel sn = concatenate(mc, n, threshold);
  long dAn = sn.dA, dBn = sn.dB, dM = mc.dM;
  EigH e = eig_hermitian(mu.mat);
  std::vector<CMatrix> ks;
  for (const auto& k : sn.step.kraus) {
    for (long beta = 0; beta < dM; ++beta) {
      double lam = std::max(0.0, e.values(beta));
      if (lam <= 1e-15) continue;
      CMatrix feed = CMatrix::Zero(dM * dAn, dAn);  // sqrt(mu_beta) |beta> (x) 1
      for (long m = 0; m < dM; ++m)
        feed.block(m * dAn, 0, dAn, dAn) =
            std::sqrt(lam) * e.vectors(m, beta) * CMatrix::Identity(dAn, dAn);
      CMatrix kf = k * feed;
      for (long alpha = 0; alpha < dM; ++alpha) {
        CMatrix out(dBn, dAn);  // (1 (x) <alpha|) k (sqrt(mu_beta)|beta> (x) 1)
        for (long b = 0; b < dBn; ++b) out.row(b) = kf.row(b * dM + alpha);
        ks.push_back(std::move(out));
      }
    }
  }
  ks = prune_kraus(ks, threshold);
  return Channel{dAn, dBn, std::move(ks)};
}

//==========================================================================
// builtin memory channels
//==========================================================================

// F = sum_ij |ij><ji| on C^d (x) C^d.
inline CMatrix flip_operator(long d) {
  CMatrix f = CMatrix::Zero(d * d, d * d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) f(i * d + j, j * d + i) = 1.0;
  return f;
}

// The defining unitaries of the single-kraus builtins act between
// memory-major spaces (M (x) A -> M' (x) B); the stored frame wants
// B (x) M', so every defining matrix gets the wire swap applied once.
inline CMatrix to_stored_frame(const CMatrix& defining, long dB, long dM) {
  CMatrix p = CMatrix::Zero(dB * dM, dM * dB);
  for (long m = 0; m < dM; ++m)
    for (long b = 0; b < dB; ++b) p(b * dM + m, m * dB + b) = 1.0;
  return p * defining;
}

// Delay line: Bob receives the memory content, the fresh input becomes the
// new memory.  Defining unitary is the flip; stored Kraus is the identity.
inline MemoryChannel shift_channel(long d) {
  return MemoryChannel::make(d, d, d, {to_stored_frame(flip_operator(d), d, d)});
}

// Transparent line: Bob receives the fresh input, memory never moves.
inline MemoryChannel id_memory_channel(long d) {
  return MemoryChannel::make(d, d, d, {to_stored_frame(CMatrix::Identity(d * d, d * d), d, d)});
}

// U_eta = cos(eta) F + i sin(eta) 1 between memory-major spaces; eta = 0 is
// the shift, eta = pi/2 the transparent line.
inline CMatrix partial_flip_defining_unitary(double eta, long d) {
  return std::cos(eta) * flip_operator(d) +
         Complex(0, 1) * std::sin(eta) * CMatrix::Identity(d * d, d * d);
}

inline MemoryChannel partial_flip(double eta, long d = 2) {
  return MemoryChannel::make(d, d, d, {to_stored_frame(partial_flip_defining_unitary(eta, d), d, d)});
}

// p id + (1-p) shift as a single Kraus family.
inline MemoryChannel mixed_shift(double p, long d = 2) {
  if (p < 0.0 || p > 1.0) throw validation_error("mixed_shift: p outside [0,1]");
  std::vector<CMatrix> ks;
  if (p > 0.0)
    ks.push_back(std::sqrt(p) * to_stored_frame(CMatrix::Identity(d * d, d * d), d, d));
  if (p < 1.0) ks.push_back(std::sqrt(1.0 - p) * to_stored_frame(flip_operator(d), d, d));
  return MemoryChannel::make(d, d, d, std::move(ks));
}

// Classical switch: the memory value selects which component acts on the
// register; the memory itself is read out (decohered) but never rewritten.
inline MemoryChannel switch_channel(const std::vector<Channel>& components) {
  if (components.empty()) throw validation_error("switch: no components");
  long d = components[0].d_in;
  long dM = static_cast<long>(components.size());
  for (const auto& c : components)
    if (c.d_in != d || c.d_out != d) throw validation_error("switch: components must share dims");
  std::vector<CMatrix> ks;
  for (long i = 0; i < dM; ++i) {
    for (const auto& t : components[i].kraus) {
      CMatrix k = CMatrix::Zero(d * dM, dM * d);
      // (b, m') <- (m, a): requires m = m' = i, register block t
      for (long b = 0; b < d; ++b)
        for (long a = 0; a < d; ++a) k(b * dM + i, i * d + a) = t(b, a);
      ks.push_back(std::move(k));
    }
  }
  return MemoryChannel::make(d, d, dM, std::move(ks));
}

// (1-eps) S + eps D with D(rho) = tr(rho) delta, delta a state on B (x) M.
inline MemoryChannel depolarize_mix(const MemoryChannel& mc, double eps,
                                    std::optional<DensityMatrix> delta = std::nullopt) {
  if (eps < 0.0 || eps > 1.0) throw validation_error("depolarize_mix: eps outside [0,1]");
  long d_in = mc.step.d_in, d_out = mc.step.d_out;
  DensityMatrix target = delta.value_or(maximally_mixed(d_out));
  if (target.dim() != d_out) throw validation_error("depolarize_mix: delta has wrong dimension");
  std::vector<CMatrix> ks;
  if (eps < 1.0)
    for (const auto& k : mc.step.kraus) ks.push_back(std::sqrt(1.0 - eps) * k);
  if (eps > 0.0) {
    EigH e = eig_hermitian(target.mat);
    for (long b = 0; b < e.values.size(); ++b) {
      double lam = std::max(0.0, e.values(b));
      if (lam <= 1e-15) continue;
      for (long i = 0; i < d_in; ++i) {
        CMatrix k = CMatrix::Zero(d_out, d_in);
        k.col(i) = std::sqrt(eps * lam) * e.vectors.col(b);
        ks.push_back(std::move(k));
      }
    }
  }
  return MemoryChannel::make(mc.dA, mc.dB, mc.dM, std::move(ks));
}

// Memoryless channel embedded as a memory channel with dM = 1.
inline MemoryChannel embed_memoryless(const Channel& ch) {
  return MemoryChannel{ch.d_in, ch.d_out, 1, ch};
}

inline double choi_distance(const Channel& a, const Channel& b) {
  if (a.d_in != b.d_in || a.d_out != b.d_out)
    throw validation_error("choi_distance: dims mismatch");
  return trace_norm(choi(a) - choi(b));
}

}  // namespace memchan
