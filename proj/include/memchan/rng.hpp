#pragma once

#include <cstdint>
#include <random>

#include "matrix.hpp"

namespace memchan {

// Seeded generator with hand-rolled gaussian sampling.  std::mt19937_64 is
// pinned by the standard, and Box-Muller on top of it keeps every stream
// identical across library versions, which the CLI needs for reproducible
// reports.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Complex cgaussian() {
    double re = gaussian();
    double im = gaussian();
    return Complex(re, im);
  }

  std::uint64_t integer(std::uint64_t bound) {  // uniform in [0, bound)
    std::uint64_t threshold = (~bound + 1) % bound;
    for (;;) {
      std::uint64_t r = gen_();
      if (r >= threshold) return r % bound;
    }
  }

  CMatrix ginibre(long rows, long cols) {
    CMatrix g(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) g(i, j) = cgaussian();
    return g;
  }

  // Haar unitary via QR with the usual R-diagonal phase correction.
  CMatrix haar_unitary(long d) {
    CMatrix g = ginibre(d, d);
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ();
    CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (long i = 0; i < d; ++i) {
      Complex rii = r(i, i);
      double m = std::abs(rii);
      q.col(i) *= (m > 0) ? (rii / m) : Complex(1, 0);
    }
    return q;
  }

  // Haar isometry C^{cols} -> C^{rows}, rows >= cols.
  CMatrix haar_isometry(long rows, long cols) {
    CMatrix u = haar_unitary(rows);
    return u.leftCols(cols);
  }

  CVector pure_ket(long d) {
    CVector v(d);
    for (long i = 0; i < d; ++i) v(i) = cgaussian();
    v.normalize();
    return v;
  }

  DensityMatrix density(long d, long rank = 0) {
    if (rank <= 0 || rank > d) rank = d;
    CMatrix g = ginibre(d, rank);
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return DensityMatrix{(rho + rho.adjoint()) / 2.0};
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace memchan
