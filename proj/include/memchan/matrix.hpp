#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace memchan {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

// Composite indices are always flattened big-endian: for H1 (x) H2 the pair
// (i1, i2) maps to i1 * d2 + i2.  Everything downstream (tensor, partial
// traces, Choi matrices, channel wiring) relies on this one convention.

constexpr double kHermTol = 1e-9;      // hermiticity / positivity slack
constexpr double kEigClip = 1e-15;     // eigenvalue clip for logs

struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

// Largest matrix dimension the toolkit will materialize.  Defaults to 4096,
// overridable through MEMCHAN_MAX_DIM or set_max_dim (CLI flag).
inline long& max_dim_slot() {
  static long dim = [] {
    if (const char* env = std::getenv("MEMCHAN_MAX_DIM")) {
      long v = std::atol(env);
      if (v > 0) return v;
    }
    return 4096L;
  }();
  return dim;
}

inline long max_dim() { return max_dim_slot(); }
inline void set_max_dim(long d) {
  if (d <= 0) throw validation_error("max dim must be positive");
  max_dim_slot() = d;
}

inline void check_dim(long d, const char* where) {
  if (d > max_dim())
    throw dimension_error(std::string(where) + ": dimension " + std::to_string(d) +
                          " exceeds ceiling " + std::to_string(max_dim()));
}

inline CMatrix identity(long d) { return CMatrix::Identity(d, d); }

inline CVector basis_ket(long d, long i) {
  CVector v = CVector::Zero(d);
  v(i) = 1.0;
  return v;
}

inline bool is_finite(const CMatrix& a) {
  return a.allFinite();
}

inline bool is_hermitian(const CMatrix& a, double tol = kHermTol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

//==========================================================================
// tensor / partial trace
//==========================================================================

inline CMatrix tensor(const CMatrix& a, const CMatrix& b) {
  check_dim(a.rows() * b.rows(), "tensor");
  check_dim(a.cols() * b.cols(), "tensor");
  CMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      c.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return c;
}

inline CMatrix tensor(const std::vector<CMatrix>& factors) {
  if (factors.empty()) return CMatrix::Identity(1, 1);
  CMatrix c = factors[0];
  for (size_t k = 1; k < factors.size(); ++k) c = tensor(c, factors[k]);
  return c;
}

inline CMatrix tensor_pow(const CMatrix& a, int n) {
  CMatrix c = CMatrix::Identity(1, 1);
  for (int k = 0; k < n; ++k) c = tensor(c, a);
  return c;
}

// Trace out the factors NOT listed in `keep`; kept factors stay in their
// original relative order.  `dims` are the factor dimensions, big-endian.
inline CMatrix partial_trace(const CMatrix& a, const std::vector<long>& dims,
                             const std::vector<int>& keep) {
  long total = 1;
  for (long d : dims) {
    if (d <= 0) throw validation_error("partial_trace: bad factor dimension");
    total *= d;
  }
  if (a.rows() != total || a.cols() != total)
    throw validation_error("partial_trace: dims do not match matrix size");
  std::vector<char> kept(dims.size(), 0);
  for (int k : keep) {
    if (k < 0 || k >= static_cast<int>(dims.size()))
      throw validation_error("partial_trace: keep index out of range");
    kept[k] = 1;
  }

  long dk = 1, dt = 1;
  for (size_t f = 0; f < dims.size(); ++f) (kept[f] ? dk : dt) *= dims[f];

  // stride of factor f in the flat index
  std::vector<long> stride(dims.size(), 1);
  for (int f = static_cast<int>(dims.size()) - 2; f >= 0; --f)
    stride[f] = stride[f + 1] * dims[f + 1];

  // flat contribution of each (kept multi-index, traced multi-index) pair
  std::vector<long> koff(dk, 0), toff(dt, 0);
  {
    long reps = 1;
    for (size_t f = 0; f < dims.size(); ++f) {
      if (!kept[f]) continue;
      long block = dk / (reps * dims[f]);
      for (long i = 0; i < dk; ++i) {
        long digit = (i / block) % dims[f];
        koff[i] += digit * stride[f];
      }
      reps *= dims[f];
    }
    reps = 1;
    for (size_t f = 0; f < dims.size(); ++f) {
      if (kept[f]) continue;
      long block = dt / (reps * dims[f]);
      for (long i = 0; i < dt; ++i) {
        long digit = (i / block) % dims[f];
        toff[i] += digit * stride[f];
      }
      reps *= dims[f];
    }
  }

  CMatrix r = CMatrix::Zero(dk, dk);
  for (long i = 0; i < dk; ++i)
    for (long j = 0; j < dk; ++j) {
      Complex s = 0.0;
      for (long t = 0; t < dt; ++t) s += a(koff[i] + toff[t], koff[j] + toff[t]);
      r(i, j) = s;
    }
  return r;
}

//==========================================================================
// decompositions (Eigen-backed) and norms
//==========================================================================

struct EigH {
  RVector values;   // descending
  CMatrix vectors;  // columns, phase-fixed
};

// Hermitian eigendecomposition, eigenvalues descending.  Each eigenvector is
// rotated so its first component above 1e-12 in magnitude is positive real,
// which keeps repeated runs byte-identical.
inline EigH eig_hermitian(const CMatrix& a, double tol = kHermTol) {
  if (!is_hermitian(a, tol)) throw validation_error("eig_hermitian: matrix not hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es((a + a.adjoint()) / 2.0);
  if (es.info() != Eigen::Success) throw std::runtime_error("eig_hermitian: solver failed");
  long n = a.rows();
  EigH out;
  out.values = RVector(n);
  out.vectors = CMatrix(n, n);
  for (long i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    CVector v = es.eigenvectors().col(n - 1 - i);
    for (long r = 0; r < n; ++r) {
      if (std::abs(v(r)) > 1e-12) {
        v *= std::conj(v(r)) / std::abs(v(r));
        break;
      }
    }
    out.vectors.col(i) = v;
  }
  return out;
}

struct Svd {
  RVector values;  // descending
  CMatrix u, v;    // a = u * diag(values) * v^dagger
};

inline Svd svd(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> s(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {s.singularValues(), s.matrixU(), s.matrixV()};
}

inline double trace_norm(const CMatrix& a) {
  if (is_hermitian(a, 1e-12)) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es((a + a.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  Eigen::JacobiSVD<CMatrix> s(a);
  return s.singularValues().sum();
}

inline double operator_norm(const CMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  // largest singular value via the Gram matrix (cheap and size-robust)
  CMatrix g = (a.rows() <= a.cols()) ? CMatrix(a * a.adjoint()) : CMatrix(a.adjoint() * a);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
  double top = es.eigenvalues().maxCoeff();
  return std::sqrt(std::max(0.0, top));
}

inline double frobenius_norm(const CMatrix& a) { return a.norm(); }

//==========================================================================
// states
//==========================================================================

inline bool is_density(const CMatrix& rho, double tol = kHermTol) {
  if (rho.rows() != rho.cols() || !is_finite(rho)) return false;
  if (!is_hermitian(rho, tol)) return false;
  if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol) return false;
  Eigen::SelfAdjointEigenSolver<CMatrix> es((rho + rho.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

struct DensityMatrix {
  CMatrix mat;

  static DensityMatrix make(const CMatrix& rho, double tol = kHermTol) {
    if (!is_density(rho, tol)) throw validation_error("not a density matrix");
    return DensityMatrix{rho};
  }
  long dim() const { return mat.rows(); }
};

inline DensityMatrix maximally_mixed(long d) {
  return DensityMatrix{CMatrix::Identity(d, d) / static_cast<double>(d)};
}

inline DensityMatrix basis_state(long d, long i) {
  CMatrix m = CMatrix::Zero(d, d);
  m(i, i) = 1.0;
  return DensityMatrix{m};
}

// Purification on H (x) H_ref with dim(H_ref) = rank support dim d; tracing
// out the second factor returns rho.
inline CVector purify(const CMatrix& rho, double tol = kHermTol) {
  if (!is_density(rho, tol)) throw validation_error("purify: not a density matrix");
  EigH e = eig_hermitian(rho, tol);
  long d = rho.rows();
  CVector psi = CVector::Zero(d * d);
  for (long k = 0; k < d; ++k) {
    double lam = std::max(0.0, e.values(k));
    if (lam <= 0.0) continue;
    double s = std::sqrt(lam);
    for (long i = 0; i < d; ++i) psi(i * d + k) += s * e.vectors(i, k);
  }
  return psi;
}

// Project a hermitian matrix onto the density-matrix set (eigenvalue simplex
// projection).  Used by the ensemble optimizers.
inline CMatrix project_to_density(const CMatrix& h) {
  EigH e = eig_hermitian((h + h.adjoint()) / 2.0, 1e300);
  long n = h.rows();
  // Euclidean projection of the eigenvalue vector onto the simplex
  std::vector<double> lam(n);
  for (long i = 0; i < n; ++i) lam[i] = e.values(i);  // already descending
  double cum = 0.0;
  long k = n;
  for (long i = 0; i < n; ++i) {
    cum += lam[i];
    double theta = (cum - 1.0) / static_cast<double>(i + 1);
    if (lam[i] - theta <= 0.0) {
      cum -= lam[i];
      k = i;
      break;
    }
  }
  double theta = (k == n) ? (cum - 1.0) / static_cast<double>(n) : (cum - 1.0) / static_cast<double>(k);
  CMatrix out = CMatrix::Zero(n, n);
  for (long i = 0; i < k; ++i) {
    double w = std::max(0.0, lam[i] - theta);
    out += w * e.vectors.col(i) * e.vectors.col(i).adjoint();
  }
  return out;
}

}  // namespace memchan
