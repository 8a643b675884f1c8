#pragma once

#include <optional>

#include "diamond.hpp"

namespace memchan {

struct DecaySeries {
  enum class Method { lemma_bound, least_squares };
  std::vector<std::pair<int, double>> points;  // (n, d_n), sorted by n
  std::optional<double> fitted_c;
  Method method = Method::least_squares;
};

// Difference between the n-step restriction and its memory-resetting
// surrogate (memory input replaced by `reset`, flat by default).  The diamond
// norm of this map over-estimates the true memory retention by at most a
// factor 2 and vanishes iff the channel is forgetful.
inline HermitianMap dn_difference(const MemoryChannel& mc, int n,
                                  std::optional<DensityMatrix> reset = {}) {
  Channel s_hat = restrict_ignore_outputs(mc, n);
  DensityMatrix sigma = reset ? *reset : maximally_mixed(mc.dM);
  if (sigma.dim() != mc.dM) throw validation_error("dn_difference: reset dim mismatch");
  long dan = s_hat.d_in / mc.dM;
  Channel pre = tensor_channels(constant_channel(mc.dM, sigma), identity_channel(dan));
  return map_difference(s_hat, compose(s_hat, pre));
}

inline double dn_estimate(const MemoryChannel& mc, int n, DiamondOptions opt = {},
                          std::optional<DensityMatrix> reset = {}) {
  return diamond_norm(dn_difference(mc, n, std::move(reset)), opt).value;
}

struct ForgetfulScan {
  std::optional<int> forgetful_at;  // smallest n with d_n < 1; absent = inconclusive
  std::vector<std::pair<int, double>> series;
};

inline ForgetfulScan is_forgetful(const MemoryChannel& mc, int n_max, DiamondOptions opt = {}) {
  ForgetfulScan scan;
  for (int n = 1; n <= n_max; ++n) {
    double d = dn_estimate(mc, n, opt);
    scan.series.emplace_back(n, d);
    if (!scan.forgetful_at && d < 1.0) {
      scan.forgetful_at = n;
      break;
    }
  }
  return scan;
}

// Largest found value of || tr_B S_n(rho1 - rho2) ||_1 over state pairs with
// equal memory-traced marginals: optimized product pairs mu1 (x) rho vs
// mu2 (x) rho, plus random correlated pairs differing by a memory-side
// unitary.
inline double schrodinger_memory_distance(const MemoryChannel& mc, int n, int samples = 50,
                                          std::uint64_t seed = 0) {
  Channel r = restrict_ignore_outputs(mc, n);
  long dm = mc.dM;
  long dan = r.d_in / dm;
  Rng rng(seed);
  double best = 0.0;

  auto polish_pair = [&](const Channel& l, CVector psi, CVector phi) {
    double prev = -1.0;
    for (int k = 0; k < 40; ++k) {
      CMatrix x = psi * psi.adjoint() - phi * phi.adjoint();
      CMatrix d = schrodinger_apply(l, x);
      Eigen::SelfAdjointEigenSolver<CMatrix> es((d + d.adjoint()) / 2.0);
      double val = es.eigenvalues().cwiseAbs().sum();
      best = std::max(best, val);
      if (val <= prev + 1e-12) break;
      prev = val;
      CMatrix sign = CMatrix::Zero(dm, dm);
      for (long i = 0; i < dm; ++i)
        sign += (es.eigenvalues()(i) >= 0 ? 1.0 : -1.0) * es.eigenvectors().col(i) *
                es.eigenvectors().col(i).adjoint();
      CMatrix h = heisenberg_apply(l, sign);
      Eigen::SelfAdjointEigenSolver<CMatrix> eh((h + h.adjoint()) / 2.0);
      psi = eh.eigenvectors().col(dm - 1);
      phi = eh.eigenvectors().col(0);
    }
  };

  std::vector<DensityMatrix> registers;
  registers.push_back(maximally_mixed(dan));
  for (long a = 0; a < std::min<long>(dan, 2); ++a) registers.push_back(basis_state(dan, a));
  int random_regs = std::max(1, samples / 10);
  for (int s = 0; s < random_regs; ++s) registers.push_back(rng.density(dan, 1));

  for (const DensityMatrix& reg : registers) {
    Channel l = compose(r, append_state_channel(reg, dm));
    for (long i = 0; i < dm; ++i)
      for (long j = i + 1; j < dm; ++j) polish_pair(l, basis_ket(dm, i), basis_ket(dm, j));
    polish_pair(l, rng.pure_ket(dm), rng.pure_ket(dm));
  }

  for (int s = 0; s < samples; ++s) {
    CMatrix rho1 = rng.density(r.d_in, 2).mat;
    CMatrix u = tensor(rng.haar_unitary(dm), CMatrix(CMatrix::Identity(dan, dan)));
    CMatrix rho2 = u * rho1 * u.adjoint();
    best = std::max(best, trace_norm(schrodinger_apply(r, rho1 - rho2)));
  }
  return best;
}

// Fit the contraction rate of a decay series.  lemma_bound takes the best
// d_N^(1/2N) over points below 1; least_squares fits log d_n against n with
// an intercept (exponential-decay regression) over the same points.
inline double decay_fit(DecaySeries& series) {
  std::vector<std::pair<int, double>> pts;
  for (auto& [n, d] : series.points)
    if (d < 1.0 && n >= 1) pts.emplace_back(n, std::max(d, 1e-300));
  if (pts.empty()) throw validation_error("decay_fit: no contraction observed");

  double c = 1.0;
  if (series.method == DecaySeries::Method::lemma_bound) {
    c = 2.0;
    for (auto& [n, d] : pts) c = std::min(c, std::pow(d, 1.0 / (2.0 * n)));
  } else {
    if (pts.size() < 2)
      throw validation_error("decay_fit: least_squares needs two points below 1");
    double sn = 0, sy = 0, snn = 0, sny = 0;
    for (auto& [n, d] : pts) {
      double y = std::log(d);
      sn += n;
      sy += y;
      snn += double(n) * n;
      sny += n * y;
    }
    double m = pts.size();
    double slope = (m * sny - sn * sy) / (m * snn - sn * sn);
    c = std::exp(slope);
  }
  c = std::min(c, 1.0);
  series.fitted_c = c;
  return c;
}

inline DecaySeries decay_series(const MemoryChannel& mc, int n_max,
                                DecaySeries::Method method = DecaySeries::Method::least_squares,
                                DiamondOptions opt = {}) {
  DecaySeries s;
  s.method = method;
  for (int n = 1; n <= n_max; ++n) s.points.emplace_back(n, dn_estimate(mc, n, opt));
  return s;
}

// (1-eps) S + eps D with D constant to a fixed output state built from delta;
// the result sits within diamond distance 2 eps of mc and forgets at rate at
// least (1-eps) per step.
inline MemoryChannel make_forgetful(const MemoryChannel& mc, double eps,
                                    std::optional<DensityMatrix> delta = {}) {
  if (!(eps > 0.0) || eps > 1.0) throw validation_error("make_forgetful: eps outside (0,1]");
  return depolarize_mix(mc, eps, std::move(delta));
}

// First n with dn_estimate < 1/2 yields a certified forgetfulness
// neighborhood of diamond radius 1/(2n) around mc.
inline std::optional<double> openness_radius(const MemoryChannel& mc, int n_max = 6,
                                             DiamondOptions opt = {}) {
  for (int n = 1; n <= n_max; ++n) {
    long dim = mc.dM;
    for (int k = 0; k < n; ++k) {
      dim *= mc.dA;
      if (dim > max_dim()) return std::nullopt;
    }
    if (dn_estimate(mc, n, opt) < 0.5) return 1.0 / (2.0 * n);
  }
  return std::nullopt;
}

}  // namespace memchan
