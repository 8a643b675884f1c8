#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "memchan/channel.hpp"
#include "memchan/rng.hpp"

namespace memchan {

//==========================================================================
// Correctable-subspace verification
//==========================================================================

struct KLVerify {
  bool holds = false;
  CMatrix omega;
  double max_residual = 0.0;
};

// Checks <a| t_i^* t_j |b> = omega_ij delta_ab over the given subspace
// basis (columns of `basis`).  holds iff every off-diagonal entry and every
// diagonal deviation from the per-operator mean stays within tol.
inline KLVerify kl_verify(const std::vector<CMatrix>& kraus, const CMatrix& basis,
                          double tol = 1e-8) {
  if (kraus.empty()) throw validation_error("kl_verify: empty kraus list");
  long d = kraus[0].cols();
  long n = basis.cols();
  if (basis.rows() != d) throw dimension_error("kl_verify: basis dimension mismatch");
  if (n < 1) throw validation_error("kl_verify: empty basis");
  CMatrix gram = basis.adjoint() * basis;
  if ((gram - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw validation_error("kl_verify: basis not orthonormal");

  long k = static_cast<long>(kraus.size());
  KLVerify r;
  r.omega = CMatrix::Zero(k, k);
  for (long i = 0; i < k; ++i)
    for (long j = 0; j < k; ++j) {
      CMatrix m = basis.adjoint() * (kraus[i].adjoint() * kraus[j]) * basis;
      Complex mean = m.trace() / double(n);
      r.omega(i, j) = mean;
      for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) {
          double dev = (a == b) ? std::abs(m(a, b) - mean) : std::abs(m(a, b));
          r.max_residual = std::max(r.max_residual, dev);
        }
    }
  r.holds = r.max_residual <= tol;
  return r;
}

//==========================================================================
// Eigenvalue-pairing code constructor
//==========================================================================

struct KLCode {
  CMatrix code_basis;  // columns span the protected subspace
  CMatrix omega;
  int halving_steps = 0;
  double max_step_residual = 0.0;
  std::string diagnostic;

  long dimension() const { return code_basis.cols(); }
};

namespace detail {

// The products t_i^* t_j split into Hermitian parts tau^* + tau and
// i(tau^* - tau); constancy of those on a subspace is equivalent to
// constancy of every product.  One operator per diagonal pair, two per
// off-diagonal pair, K^2 in total.
inline std::vector<CMatrix> hermitian_products(const std::vector<CMatrix>& kraus) {
  std::vector<CMatrix> ops;
  long k = static_cast<long>(kraus.size());
  for (long i = 0; i < k; ++i)
    for (long j = i; j < k; ++j) {
      CMatrix tau = kraus[i].adjoint() * kraus[j];
      if (i == j) {
        ops.push_back(0.5 * (tau + tau.adjoint()));
      } else {
        ops.push_back(tau.adjoint() + tau);
        ops.push_back(Complex(0, 1) * (tau.adjoint() - tau));
      }
    }
  return ops;
}

}  // namespace detail

// Builds a correctable subspace by repeatedly balancing the spectrum of
// each Hermitianized product around its median and merging eigenvector
// pairs with opposite offsets; eigenvectors already sitting at the median
// are kept as they are.  Guarantees dimension >= floor(d / 2^(K^2)).
inline KLCode pairing_construct(const std::vector<CMatrix>& kraus,
                                std::optional<std::uint64_t> shuffle_seed = {}) {
  if (kraus.empty()) throw validation_error("pairing_construct: empty kraus list");
  long d = kraus[0].cols();
  for (const auto& k : kraus)
    if (k.cols() != d) throw dimension_error("pairing_construct: mixed domain dims");
  check_dim(d, "pairing_construct");

  std::vector<CMatrix> ops = detail::hermitian_products(kraus);
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = ops.size(); i > 1; --i)
      std::swap(ops[i - 1], ops[rng.integer(static_cast<long>(i))]);
  }

  KLCode code;
  code.code_basis = CMatrix::Identity(d, d);

  for (const auto& tau : ops) {
    long r = code.code_basis.cols();
    if (r == 0) break;
    CMatrix c = code.code_basis.adjoint() * tau * code.code_basis;
    c = 0.5 * (c + c.adjoint());
    EigH e = eig_hermitian(c);
    double spread = e.values(0) - e.values(r - 1);
    if (spread <= 2e-12) continue;  // already constant on the subspace

    // eig_hermitian sorts descending; the lower median keeps at least
    // half the dimensions retainable regardless of degeneracies
    std::vector<long> order(r);
    for (long i = 0; i < r; ++i) order[i] = r - 1 - i;  // ascending
    double omega = e.values(order[(r - 1) / 2]);
    double ztol = 1e-12 * std::max(1.0, std::abs(e.values(0)));

    std::vector<long> zero, pos, neg;
    for (long i = 0; i < r; ++i) {
      double mu = e.values(i) - omega;
      if (std::abs(mu) <= ztol)
        zero.push_back(i);
      else if (mu > 0)
        pos.push_back(i);
      else
        neg.push_back(i);
    }
    // pair small offsets first so the dropped surplus sits farthest out
    std::sort(pos.begin(), pos.end(), [&](long a, long b) {
      return e.values(a) - omega < e.values(b) - omega;
    });
    std::sort(neg.begin(), neg.end(), [&](long a, long b) {
      return omega - e.values(a) < omega - e.values(b);
    });
    long npair = static_cast<long>(std::min(pos.size(), neg.size()));

    CMatrix sel(r, static_cast<long>(zero.size()) + npair);
    long col = 0;
    for (long z : zero) sel.col(col++) = e.vectors.col(z);
    for (long t = 0; t < npair; ++t) {
      double mu_p = e.values(pos[t]) - omega;
      double mu_n = e.values(neg[t]) - omega;
      double ratio = mu_p / (-mu_n);
      sel.col(col++) = (e.vectors.col(pos[t]) + std::sqrt(ratio) * e.vectors.col(neg[t])) /
                       std::sqrt(1.0 + ratio);
    }

    CMatrix resid = sel.adjoint() * (c - omega * CMatrix::Identity(r, r)) * sel;
    code.max_step_residual = std::max(code.max_step_residual, resid.cwiseAbs().maxCoeff());
    code.code_basis = code.code_basis * sel;
    ++code.halving_steps;
  }

  if (code.dimension() == 0) {
    code.diagnostic = "dimension exhausted after " + std::to_string(code.halving_steps) +
                      " reduction steps";
    code.omega = CMatrix::Zero(static_cast<long>(kraus.size()),
                               static_cast<long>(kraus.size()));
    return code;
  }
  KLVerify v = kl_verify(kraus, code.code_basis, 1e-8);
  code.omega = v.omega;
  if (!v.holds)
    code.diagnostic = "verification residual " + std::to_string(v.max_residual);
  return code;
}

//==========================================================================
// Recovery synthesis
//==========================================================================

// Entanglement fidelity of recover . transmit on the code subspace.
inline double recovery_fidelity(const std::vector<CMatrix>& kraus, const Channel& recover,
                                const CMatrix& basis) {
  long n = basis.cols();
  double f = 0.0;
  for (const auto& r : recover.kraus)
    for (const auto& t : kraus) {
      Complex tr = (basis.adjoint() * r * t * basis).trace();
      f += std::norm(tr);
    }
  return f / double(n * n);
}

// Channel R with R(S(rho)) = rho on the code subspace.  Rotating the Kraus
// operators into the eigenbasis of omega makes them scaled isometries with
// orthogonal ranges on the code; the recovery inverts each range.
inline Channel recovery_channel(const std::vector<CMatrix>& kraus, const KLCode& code,
                                double tol = 1e-6) {
  KLVerify v = kl_verify(kraus, code.code_basis, tol);
  if (!v.holds)
    throw validation_error("recovery_channel: correction conditions violated, residual " +
                           std::to_string(v.max_residual));
  long d_in = kraus[0].cols();
  long d_out = kraus[0].rows();
  long k = static_cast<long>(kraus.size());
  const CMatrix& b = code.code_basis;

  CMatrix omega = 0.5 * (v.omega + v.omega.adjoint());
  EigH e = eig_hermitian(omega);

  std::vector<CMatrix> rec;
  CMatrix ranges = CMatrix::Zero(d_out, d_out);
  for (long m = 0; m < k; ++m) {
    if (e.values(m) <= 1e-12) continue;
    CMatrix f = CMatrix::Zero(d_out, d_in);
    for (long i = 0; i < k; ++i) f += e.vectors(i, m) * kraus[i];
    Eigen::JacobiSVD<CMatrix> svd(f * b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    CMatrix w = svd.matrixU() * svd.matrixV().adjoint();
    rec.push_back(b * w.adjoint());
    ranges += w * w.adjoint();
  }

  // dump everything outside the recovered ranges into a fixed state
  EigH comp = eig_hermitian(CMatrix(CMatrix::Identity(d_out, d_out) - ranges));
  for (long m = 0; m < d_out; ++m) {
    if (comp.values(m) <= 1e-14) continue;
    rec.push_back(basis_ket(d_in, 0) *
                  (std::sqrt(comp.values(m)) * comp.vectors.col(m)).adjoint());
  }

  // polish to an exactly trace-preserving set
  CMatrix total = CMatrix::Zero(d_out, d_out);
  for (const auto& r : rec) total += r.adjoint() * r;
  EigH te = eig_hermitian(total);
  CVector inv_sqrt(d_out);
  for (long i = 0; i < d_out; ++i)
    inv_sqrt(i) = 1.0 / std::sqrt(std::max(te.values(i), 1e-12));
  CMatrix fix = te.vectors * inv_sqrt.asDiagonal() * te.vectors.adjoint();
  for (auto& r : rec) r = r * fix;

  return Channel::make(d_out, d_in, std::move(rec));
}

//==========================================================================
// Rate demonstration for single-Kraus memories
//==========================================================================

struct RateDemo {
  long code_dim = 0;
  long guaranteed_floor = 0;
  double fidelity = 0.0;
  int kraus_count = 0;
};

// Fixes the memory input to mu, traces the final memory, runs the pairing
// constructor on the n-block restriction, and reports the achieved code
// dimension against the floor(min(dA,dB)^n / 2^(dM^4)) guarantee.
inline RateDemo pure_channel_rate_demo(const MemoryChannel& mc, const DensityMatrix& mu,
                                       int n) {
  if (mc.step.kraus.size() != 1)
    throw validation_error("pure_channel_rate_demo: memory channel is not pure");
  Channel hat = fix_memory_input(mc, mu, n);

  RateDemo demo;
  demo.kraus_count = static_cast<int>(hat.kraus.size());
  double dmin = static_cast<double>(std::min(mc.dA, mc.dB));
  double floor_val = std::pow(dmin, n) / std::exp2(std::pow(double(mc.dM), 4.0));
  demo.guaranteed_floor = static_cast<long>(std::floor(floor_val));

  KLCode code = pairing_construct(hat.kraus);
  demo.code_dim = code.dimension();
  if (demo.code_dim > 0) {
    Channel rec = recovery_channel(hat.kraus, code);
    demo.fidelity = recovery_fidelity(hat.kraus, rec, code.code_basis);
  }
  return demo;
}

}  // namespace memchan
