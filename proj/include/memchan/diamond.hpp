#pragma once

#include "channel.hpp"
#include "rng.hpp"

namespace memchan {

// Hermitian-preserving map carried by its Choi matrix (in (x) out ordering).
// Differences of channels land here.
struct HermitianMap {
  long d_in = 0;
  long d_out = 0;
  CMatrix choi;

  static HermitianMap make(long d_in, long d_out, CMatrix j, double tol = 1e-8) {
    if (j.rows() != d_in * d_out || j.cols() != d_in * d_out)
      throw validation_error("hermitian map: choi dims mismatch");
    if (!is_hermitian(j, tol)) throw validation_error("hermitian map: choi not hermitian");
    return HermitianMap{d_in, d_out, std::move(j)};
  }

  CMatrix block(long i, long j) const {  // Phi(|i><j|)
    return choi.block(i * d_out, j * d_out, d_out, d_out);
  }

  // Choi reshuffled to ((o,p),(i,j)) so map applications become matmuls.
  CMatrix reshuffled() const {
    CMatrix j2(d_out * d_out, d_in * d_in);
    for (long o = 0; o < d_out; ++o)
      for (long p = 0; p < d_out; ++p)
        for (long i = 0; i < d_in; ++i)
          for (long jj = 0; jj < d_in; ++jj)
            j2(o * d_out + p, i * d_in + jj) = choi(i * d_out + o, jj * d_out + p);
    return j2;
  }
};

inline HermitianMap map_of(const Channel& ch) {
  return HermitianMap::make(ch.d_in, ch.d_out, choi(ch));
}

inline HermitianMap map_difference(const Channel& a, const Channel& b) {
  if (a.d_in != b.d_in || a.d_out != b.d_out)
    throw validation_error("map_difference: dims mismatch");
  return HermitianMap::make(a.d_in, a.d_out, choi(a) - choi(b));
}

inline CMatrix apply_map(const HermitianMap& m, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(m.d_out, m.d_out);
  for (long i = 0; i < m.d_in; ++i)
    for (long j = 0; j < m.d_in; ++j) out += x(i, j) * m.block(i, j);
  return out;
}

// (Phi (x) id_ref) |psi><psi| for psi on H_in (x) H_ref, via one matmul on the
// reshuffled Choi.
inline CMatrix apply_map_extended(const HermitianMap& m, const CVector& psi, long d_ref) {
  long d_in = m.d_in, d_out = m.d_out;
  CMatrix x(d_in, d_ref);  // x(i, r) = psi(i, r)
  for (long i = 0; i < d_in; ++i)
    for (long r = 0; r < d_ref; ++r) x(i, r) = psi(i * d_ref + r);
  CMatrix c2(d_in * d_in, d_ref * d_ref);  // ((i,j),(r,s)) -> x(i,r) conj(x(j,s))
  for (long i = 0; i < d_in; ++i)
    for (long j = 0; j < d_in; ++j) {
      CMatrix outer = x.row(i).transpose() * x.row(j).conjugate();
      for (long r = 0; r < d_ref; ++r)
        for (long s = 0; s < d_ref; ++s) c2(i * d_in + j, r * d_ref + s) = outer(r, s);
    }
  CMatrix a2 = m.reshuffled() * c2;  // ((o,p),(r,s))
  CMatrix out(d_out * d_ref, d_out * d_ref);
  for (long o = 0; o < d_out; ++o)
    for (long p = 0; p < d_out; ++p)
      for (long r = 0; r < d_ref; ++r)
        for (long s = 0; s < d_ref; ++s)
          out(o * d_ref + r, p * d_ref + s) = a2(o * d_out + p, r * d_ref + s);
  return (out + out.adjoint()) / 2.0;
}

struct DiamondResult {
  double value = 0.0;
  double upper_certificate = 0.0;
  double lower_witness = 0.0;
  long iterations = 0;
  bool converged = false;
};

struct DiamondOptions {
  double tol = 1e-6;
  long max_iter = 50000;
  long check_every = 25;
  double rho = 1.0;
  double relax = 1.6;
};

namespace detail {

inline CMatrix psd_project(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) / 2.0);
  long n = h.rows();
  CMatrix out = CMatrix::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    double lam = es.eigenvalues()(i);
    if (lam > 0.0) out += lam * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  }
  return out;
}

inline double min_eig(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eig(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline CMatrix trace_out_right(const CMatrix& z, long d_in, long d_out) {
  CMatrix w = CMatrix::Zero(d_in, d_in);
  for (long i = 0; i < d_in; ++i)
    for (long j = 0; j < d_in; ++j) {
      Complex s = 0.0;
      for (long o = 0; o < d_out; ++o) s += z(i * d_out + o, j * d_out + o);
      w(i, j) = s;
    }
  return w;
}

inline CMatrix expand_left(const CMatrix& w, long d_out) {  // w (x) 1_out
  long d_in = w.rows();
  CMatrix z = CMatrix::Zero(d_in * d_out, d_in * d_out);
  for (long i = 0; i < d_in; ++i)
    for (long j = 0; j < d_in; ++j)
      for (long o = 0; o < d_out; ++o) z(i * d_out + o, j * d_out + o) = w(i, j);
  return z;
}

// Primal feasibility repair: clip the recovered multipliers to the PSD cone
// and scale the pair until W+ + W- <= sigma (x) 1.  The repaired objective
// <J, W+ - W-> is a genuine lower bound by weak duality.
inline double feasible_lower(const CMatrix& j, CMatrix wp, CMatrix wm, const CMatrix& sigma_raw,
                             long d_in, long d_out) {
  wp = psd_project(wp);
  wm = psd_project(wm);
  CMatrix sigma = psd_project(sigma_raw);
  double tr = sigma.trace().real();
  if (tr <= 1e-14) return 0.0;
  sigma /= tr;
  sigma = (1.0 - 1e-12) * sigma + (1e-12 / double(d_in)) * CMatrix::Identity(d_in, d_in);

  Eigen::SelfAdjointEigenSolver<CMatrix> es(sigma);
  CMatrix inv_sqrt = CMatrix::Zero(d_in, d_in);
  for (long i = 0; i < d_in; ++i) {
    double lam = std::max(es.eigenvalues()(i), 1e-15);
    inv_sqrt +=
        (1.0 / std::sqrt(lam)) * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  }
  CMatrix r = expand_left(inv_sqrt, d_out);
  double mu = max_eig(r * (wp + wm) * r);
  if (mu > 1.0) {
    wp /= mu;
    wm /= mu;
  }
  return ((j * (wp - wm)).trace()).real();
}

}  // namespace detail

// Diamond norm by operator splitting on the dual program
//     minimize  lambda_max(tr_out Z)   subject to  Z >= J, Z >= -J,
// reported with a certified bracket: upper_certificate from a repaired
// feasible Z, lower_witness from repaired multipliers of the paired program
//     maximize <J, W+ - W->  s.t.  W+- >= 0, W+ + W- <= sigma (x) 1, tr sigma = 1.
inline DiamondResult diamond_norm(const HermitianMap& m, DiamondOptions opt = {}) {
  long d_in = m.d_in, d_out = m.d_out;
  long D = d_in * d_out;
  check_dim(D, "diamond_norm");

  double scale = operator_norm(m.choi);
  DiamondResult res;
  if (scale < 1e-300) {
    res.converged = true;
    return res;
  }
  CMatrix j = m.choi / scale;
  CMatrix eye_in = CMatrix::Identity(d_in, d_in);

  CMatrix z = detail::psd_project(j) + detail::psd_project(-j);
  double t = detail::max_eig(detail::trace_out_right(z, d_in, d_out));
  CMatrix sa = z - j, sb = z + j;
  CMatrix sc = t * eye_in - detail::trace_out_right(z, d_in, d_out);
  CMatrix ua = CMatrix::Zero(D, D), ub = CMatrix::Zero(D, D);
  CMatrix uc = CMatrix::Zero(d_in, d_in);

  double rho = opt.rho, alpha = opt.relax;
  double best_upper = std::numeric_limits<double>::infinity(), best_lower = 0.0;
  long it = 0;
  CMatrix pa = sa, pb = sb, pc = sc;  // s at the previous balance check

  for (it = 1; it <= opt.max_iter; ++it) {
    CMatrix va = sa - ua, vb = sb - ub, vc = sc - uc;
    CMatrix g = va + vb;
    double tnew =
        ((g.trace().real() + 2.0 * vc.trace().real()) - (2.0 + d_out) / rho) / (2.0 * d_in);
    CMatrix w =
        (detail::trace_out_right(g, d_in, d_out) + d_out * (tnew * eye_in - vc)) / (2.0 + d_out);
    z = (g + detail::expand_left(tnew * eye_in - vc - w, d_out)) / 2.0;
    t = tnew;

    CMatrix fa = z - j, fb = z + j;
    CMatrix fc = t * eye_in - detail::trace_out_right(z, d_in, d_out);

    CMatrix ra = alpha * fa + (1.0 - alpha) * sa;
    CMatrix rb = alpha * fb + (1.0 - alpha) * sb;
    CMatrix rc = alpha * fc + (1.0 - alpha) * sc;
    sa = detail::psd_project(ra + ua);
    sb = detail::psd_project(rb + ub);
    sc = detail::psd_project(rc + uc);
    ua += ra - sa;
    ub += rb - sb;
    uc += rc - sc;

    if (it % opt.check_every == 0 || it == opt.max_iter) {
      double eps = std::max(0.0, -std::min(detail::min_eig(fa), detail::min_eig(fb)));
      double upper = detail::max_eig(detail::trace_out_right(z, d_in, d_out)) + eps * d_out;
      best_upper = std::min(best_upper, upper);
      double lower = detail::feasible_lower(j, -rho * ua, -rho * ub, -rho * uc, d_in, d_out);
      best_lower = std::max(best_lower, lower);
      if (best_upper - best_lower <= opt.tol / scale) break;

      // residual balancing: primal ||F(x)-s|| vs dual rho ||M*(s - s_prev)||
      double rn = std::sqrt((fa - sa).squaredNorm() + (fb - sb).squaredNorm() +
                            (fc - sc).squaredNorm());
      CMatrix dz = (sa - pa) + (sb - pb) - detail::expand_left(sc - pc, d_out);
      double dt = (sc - pc).trace().real();
      double dn = rho * std::sqrt(dz.squaredNorm() + dt * dt);
      pa = sa;
      pb = sb;
      pc = sc;
      if (rn > 10.0 * dn && rho < 1e8) {
        rho *= 2.0;
        ua /= 2.0;
        ub /= 2.0;
        uc /= 2.0;
      } else if (dn > 10.0 * rn && rho > 1e-8) {
        rho /= 2.0;
        ua *= 2.0;
        ub *= 2.0;
        uc *= 2.0;
      }
    }
  }

  res.iterations = std::min(it, opt.max_iter);
  res.upper_certificate = best_upper * scale;
  res.lower_witness = std::max(0.0, best_lower) * scale;
  res.value = (res.upper_certificate + res.lower_witness) / 2.0;
  res.converged = (res.upper_certificate - res.lower_witness) <= opt.tol;
  return res;
}

inline DiamondResult diamond_distance(const Channel& a, const Channel& b,
                                      DiamondOptions opt = {}) {
  return diamond_norm(map_difference(a, b), opt);
}

// Lower bound by local search over pure inputs psi on H_in (x) H_in:
// alternate the trace-norm sign observable of the extended output with the
// top eigenvector of the pulled-back objective.  First start is maximally
// entangled, the rest are random.
inline double diamond_lower_witness(const HermitianMap& m, std::uint64_t seed = 0,
                                    int restarts = 8, int iters = 60) {
  long d_in = m.d_in, d_out = m.d_out, d_ref = m.d_in;
  CMatrix j2 = m.reshuffled();
  Rng rng(seed);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    CVector psi(d_in * d_ref);
    if (r == 0) {
      psi.setZero();
      for (long i = 0; i < d_in; ++i) psi(i * d_ref + i) = 1.0 / std::sqrt(double(d_in));
    } else {
      psi = rng.pure_ket(d_in * d_ref);
    }
    double prev = -1.0;
    for (int k = 0; k < iters; ++k) {
      CMatrix a = apply_map_extended(m, psi, d_ref);
      Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
      double val = es.eigenvalues().cwiseAbs().sum();
      best = std::max(best, val);
      if (val <= prev + 1e-12) break;
      prev = val;
      CMatrix sign = CMatrix::Zero(a.rows(), a.cols());
      for (long i = 0; i < es.eigenvalues().size(); ++i)
        sign += (es.eigenvalues()(i) >= 0 ? 1.0 : -1.0) * es.eigenvectors().col(i) *
                es.eigenvectors().col(i).adjoint();
      // pull the sign observable back: B = (Phi^* (x) id)(sign)
      CMatrix w2(d_out * d_out, d_ref * d_ref);
      for (long o = 0; o < d_out; ++o)
        for (long p = 0; p < d_out; ++p)
          for (long rr = 0; rr < d_ref; ++rr)
            for (long ss = 0; ss < d_ref; ++ss)
              w2(o * d_out + p, rr * d_ref + ss) = sign(o * d_ref + rr, p * d_ref + ss);
      CMatrix b2 = j2.adjoint() * w2;  // ((i,j),(r,s))
      CMatrix b(d_in * d_ref, d_in * d_ref);
      for (long i = 0; i < d_in; ++i)
        for (long jj = 0; jj < d_in; ++jj)
          for (long rr = 0; rr < d_ref; ++rr)
            for (long ss = 0; ss < d_ref; ++ss)
              b(i * d_ref + rr, jj * d_ref + ss) = b2(i * d_in + jj, rr * d_ref + ss);
      Eigen::SelfAdjointEigenSolver<CMatrix> eb((b + b.adjoint()) / 2.0);
      psi = eb.eigenvectors().col(d_in * d_ref - 1);
    }
  }
  return best;
}

// Operator-norm (1->1) estimate of the map, maximized over rank-one inputs
// |u><v| by alternating with the SVD polar observable; returned scaled by
// d_out^2.  Upper-bounds the cb norm by the memory-square rule.
inline double cb_upper_from_opnorm(const HermitianMap& m, std::uint64_t seed = 0,
                                   int restarts = 8, int iters = 60) {
  long d_in = m.d_in;
  Rng rng(seed);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    CVector u = rng.pure_ket(d_in), v = (r == 0) ? u : rng.pure_ket(d_in);
    double prev = -1.0;
    for (int k = 0; k < iters; ++k) {
      CMatrix out = apply_map(m, u * v.adjoint());
      Eigen::JacobiSVD<CMatrix> s(out, Eigen::ComputeThinU | Eigen::ComputeThinV);
      double val = s.singularValues().sum();
      best = std::max(best, val);
      if (val <= prev + 1e-12) break;
      prev = val;
      CMatrix wpol = s.matrixU() * s.matrixV().adjoint();
      CMatrix d(d_in, d_in);
      for (long i = 0; i < d_in; ++i)
        for (long jj = 0; jj < d_in; ++jj) d(i, jj) = (wpol.adjoint() * m.block(i, jj)).trace();
      // maximize |u^T d conj(v)| over unit u, v
      Eigen::JacobiSVD<CMatrix> sd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
      u = sd.matrixU().col(0).conjugate();
      v = sd.matrixV().col(0).conjugate();
    }
  }
  return static_cast<double>(m.d_out * m.d_out) * best;
}

}  // namespace memchan
