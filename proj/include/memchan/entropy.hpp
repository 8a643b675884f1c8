#pragma once

#include <optional>

#include "channel.hpp"
#include "rng.hpp"

namespace memchan {

inline double entropy_bits(const CMatrix& rho) {
  EigH e = eig_hermitian(rho);
  double h = 0.0;
  for (long i = 0; i < e.values.size(); ++i) {
    double lam = e.values(i);
    if (lam > kEigClip) h -= lam * std::log2(lam);
  }
  return h;
}

inline double vn_entropy(const DensityMatrix& rho) { return entropy_bits(rho.mat); }

// log2 of a PSD matrix with eigenvalue clipping
inline CMatrix log2m(const CMatrix& a) {
  EigH e = eig_hermitian(a);
  CMatrix out = CMatrix::Zero(a.rows(), a.cols());
  for (long i = 0; i < e.values.size(); ++i)
    out += std::log2(std::max(e.values(i), kEigClip)) * e.vectors.col(i) *
           e.vectors.col(i).adjoint();
  return out;
}

inline double relative_entropy_bits(const CMatrix& a, const CMatrix& b) {
  return (a * (log2m(a) - log2m(b))).trace().real();
}

struct Ensemble {
  std::vector<double> probs;
  std::vector<DensityMatrix> states;

  static Ensemble make(std::vector<double> probs, std::vector<DensityMatrix> states) {
    if (probs.size() != states.size() || probs.empty())
      throw validation_error("ensemble: length mismatch");
    double total = 0.0;
    for (double p : probs) {
      if (p < -1e-14) throw validation_error("ensemble: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw validation_error("ensemble: probabilities not normalized");
    long d = states.front().dim();
    for (const DensityMatrix& s : states)
      if (s.dim() != d) throw validation_error("ensemble: state dims differ");
    return Ensemble{std::move(probs), std::move(states)};
  }

  long dim() const { return states.front().dim(); }
  CMatrix average() const {
    CMatrix a = CMatrix::Zero(dim(), dim());
    for (std::size_t i = 0; i < probs.size(); ++i) a += probs[i] * states[i].mat;
    return a;
  }
};

inline double holevo_chi(const Channel& ch, const Ensemble& e) {
  if (e.dim() != ch.d_in) throw dimension_error("holevo_chi: ensemble dim mismatch");
  CMatrix avg = CMatrix::Zero(ch.d_out, ch.d_out);
  double mean_h = 0.0;
  for (std::size_t i = 0; i < e.probs.size(); ++i) {
    CMatrix out = schrodinger_apply(ch, e.states[i].mat);
    avg += e.probs[i] * out;
    mean_h += e.probs[i] * entropy_bits(out);
  }
  return std::max(0.0, entropy_bits(avg) - mean_h);
}

// Output-entropy gap against the purified reference: H(S(rho)) minus the
// entropy of (S (x) id) applied to a purification of rho.
inline double coherent_info(const Channel& ch, const DensityMatrix& rho) {
  if (rho.dim() != ch.d_in) throw dimension_error("coherent_info: dim mismatch");
  CVector psi = purify(rho.mat);
  long d_ref = psi.size() / ch.d_in;
  Channel ext = tensor_channels(ch, identity_channel(d_ref));
  CMatrix joint = schrodinger_apply(ext, psi * psi.adjoint());
  return entropy_bits(schrodinger_apply(ch, rho.mat)) - entropy_bits(joint);
}

// Same number through the environment: H(S(rho)) - H(S^c(rho)).
inline double coherent_info_via_complement(const Channel& ch, const Channel& comp,
                                           const DensityMatrix& rho) {
  return entropy_bits(schrodinger_apply(ch, rho.mat)) -
         entropy_bits(schrodinger_apply(comp, rho.mat));
}

inline double private_chi_gap(const Channel& ch, const Ensemble& e) {
  return holevo_chi(ch, e) - holevo_chi(complementary(ch), e);
}

//==========================================================================
// Maximizers (lower estimates with monotone traces)
//==========================================================================

struct ChiResult {
  double value = 0.0;
  Ensemble ensemble;
  std::vector<double> trace;
  bool hit_iter_cap = false;
};

struct CoherentResult {
  double value = 0.0;
  DensityMatrix rho;
  std::vector<double> trace;
  bool hit_iter_cap = false;
};

// Alternating search: exponentiated reweighting of the probabilities (exact
// coordinate ascent for fixed states) and accept-if-better projected gradient
// steps on the states.  Restart 0 seeds the input basis; the rest are random.
inline ChiResult maximize_chi(const Channel& ch, int n_states = 0, int restarts = 4,
                              std::uint64_t seed = 0, int iter_cap = 200) {
  long d = ch.d_in;
  if (n_states <= 0) n_states = static_cast<int>(d * d);
  if (n_states < 2) throw validation_error("maximize_chi: need at least two states");
  Rng rng(seed);

  ChiResult best;
  best.value = -1.0;

  for (int r = 0; r < restarts; ++r) {
    std::vector<DensityMatrix> states;
    for (int i = 0; i < n_states; ++i) {
      if (r == 0 && i < d) {
        states.push_back(basis_state(d, i));
      } else {
        CVector k = rng.pure_ket(d);
        states.push_back(DensityMatrix{k * k.adjoint()});
      }
    }
    std::vector<double> p(n_states, 1.0 / n_states);

    auto chi_of = [&](const std::vector<double>& pp, const std::vector<DensityMatrix>& ss) {
      return holevo_chi(ch, Ensemble{pp, ss});
    };

    double cur = chi_of(p, states);
    double eta = 0.3;
    std::vector<double> trace{cur};
    bool capped = true;

    for (int it = 0; it < iter_cap; ++it) {
      // probability reweighting
      std::vector<CMatrix> outs(n_states);
      CMatrix avg = CMatrix::Zero(ch.d_out, ch.d_out);
      for (int i = 0; i < n_states; ++i) {
        outs[i] = schrodinger_apply(ch, states[i].mat);
        avg += p[i] * outs[i];
      }
      CMatrix log_avg = log2m(avg);
      double norm = 0.0;
      std::vector<double> w(n_states);
      for (int i = 0; i < n_states; ++i) {
        double div = (outs[i] * (log2m(outs[i]) - log_avg)).trace().real();
        w[i] = p[i] * std::exp2(std::min(div, 60.0));
        norm += w[i];
      }
      if (norm > 0.0)
        for (int i = 0; i < n_states; ++i) p[i] = w[i] / norm;
      cur = chi_of(p, states);

      // state ascent, kept only when it helps
      avg.setZero();
      for (int i = 0; i < n_states; ++i) {
        outs[i] = schrodinger_apply(ch, states[i].mat);
        avg += p[i] * outs[i];
      }
      log_avg = log2m(avg);
      std::vector<DensityMatrix> cand = states;
      for (int i = 0; i < n_states; ++i) {
        if (p[i] < 1e-12) continue;
        CMatrix g = heisenberg_apply(ch, CMatrix(log2m(outs[i]) - log_avg));
        cand[i] = DensityMatrix{project_to_density(CMatrix(states[i].mat + eta * g))};
      }
      double cand_val = chi_of(p, cand);
      if (cand_val > cur) {
        states = std::move(cand);
        cur = cand_val;
        eta = std::min(eta * 1.15, 2.0);
      } else {
        eta *= 0.5;
      }
      trace.push_back(std::max(cur, trace.back()));
      if (it >= 10 && trace.back() - trace[trace.size() - 6] < 1e-10) {
        capped = false;
        break;
      }
      if (eta < 1e-9) {
        capped = false;
        break;
      }
    }

    if (trace.back() > best.value) {
      best.value = trace.back();
      best.ensemble = Ensemble{p, states};
      best.trace = trace;
      best.hit_iter_cap = capped;
    }
  }
  return best;
}

// Gradient of the coherent information in the square-root parametrization
// rho = A A^dagger / tr(A A^dagger); returns d f / d conj(A).
inline CMatrix coherent_sqrt_gradient(const Channel& ch, const Channel& comp, const CMatrix& a) {
  double tau = (a * a.adjoint()).trace().real();
  CMatrix rho = a * a.adjoint() / tau;
  CMatrix g = heisenberg_apply(comp, log2m(schrodinger_apply(comp, rho))) -
              heisenberg_apply(ch, log2m(schrodinger_apply(ch, rho)));
  double bias = (g * rho).trace().real();
  return (g - bias * CMatrix::Identity(a.rows(), a.rows())) * a / tau;
}

inline CoherentResult maximize_coherent(const Channel& ch, int restarts = 4,
                                        std::uint64_t seed = 0, int iter_cap = 300) {
  long d = ch.d_in;
  Rng rng(seed);
  Channel comp = complementary(ch);

  auto value_of = [&](const CMatrix& a) {
    double tau = (a * a.adjoint()).trace().real();
    DensityMatrix rho{a * a.adjoint() / tau};
    return coherent_info_via_complement(ch, comp, rho);
  };

  CoherentResult best;
  best.value = -std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    CMatrix a = (r == 0) ? CMatrix(CMatrix::Identity(d, d)) : rng.ginibre(d, d);
    a /= std::sqrt((a * a.adjoint()).trace().real());
    double cur = value_of(a);
    double eta = 0.5;
    std::vector<double> trace{cur};
    bool capped = true;

    for (int it = 0; it < iter_cap; ++it) {
      CMatrix grad = coherent_sqrt_gradient(ch, comp, a);
      CMatrix cand = a + eta * grad;
      double cand_val = value_of(cand);
      if (cand_val > cur) {
        a = cand;
        a /= std::sqrt((a * a.adjoint()).trace().real());
        cur = cand_val;
        eta = std::min(eta * 1.2, 4.0);
      } else {
        eta *= 0.5;
      }
      trace.push_back(std::max(cur, trace.back()));
      if (eta < 1e-10) {
        capped = false;
        break;
      }
      if (it >= 12 && trace.back() - trace[trace.size() - 8] < 1e-11) {
        capped = false;
        break;
      }
    }

    if (trace.back() > best.value) {
      double tau = (a * a.adjoint()).trace().real();
      best.value = trace.back();
      best.rho = DensityMatrix{a * a.adjoint() / tau};
      best.trace = trace;
      best.hit_iter_cap = capped;
    }
  }
  return best;
}

//==========================================================================
// Capacity settings and per-n bound estimates
//==========================================================================

enum class MemoryHolder { alice, eve };
enum class FinalReader { bob, eve };
enum class BoundKind { classical_chi, quantum_coherent, private_gap };

struct CapacitySetting {
  MemoryHolder init = MemoryHolder::alice;
  FinalReader reads = FinalReader::bob;
  std::optional<DensityMatrix> mu;  // required when Eve initializes

  static CapacitySetting ab() { return {MemoryHolder::alice, FinalReader::bob, {}}; }
  static CapacitySetting ae() { return {MemoryHolder::alice, FinalReader::eve, {}}; }
  static CapacitySetting eb(DensityMatrix mu) {
    return {MemoryHolder::eve, FinalReader::bob, std::move(mu)};
  }
  static CapacitySetting ee(DensityMatrix mu) {
    return {MemoryHolder::eve, FinalReader::eve, std::move(mu)};
  }
};

struct BoundReport {
  CapacitySetting setting;
  int n = 0;
  BoundKind kind = BoundKind::classical_chi;
  double value_bits_per_use = 0.0;
  std::vector<double> optimizer_trace;
};

// The channel the sender actually optimizes over in a given setting: the
// full n-step concatenation, with the memory input fed by Eve's mu when she
// initializes, and the final memory traced away when Eve reads it.
inline Channel effective_channel(const MemoryChannel& mc, int n, const CapacitySetting& s) {
  Channel sn = concatenate(mc, n).step;
  long dbn = sn.d_out / mc.dM;
  Channel eff = sn;
  if (s.init == MemoryHolder::eve) {
    if (!s.mu) throw validation_error("capacity setting: Eve initializes but mu is absent");
    if (s.mu->dim() != mc.dM) throw validation_error("capacity setting: mu dim mismatch");
    eff = compose(eff, prepend_state_channel(*s.mu, eff.d_in / mc.dM));
  }
  if (s.reads == FinalReader::eve)
    eff = compose(trace_out_channel(dbn, mc.dM, 1), eff);
  return eff;
}

inline BoundReport capacity_bound(const MemoryChannel& mc, int n, const CapacitySetting& s,
                                  BoundKind kind, int restarts = 2, std::uint64_t seed = 0,
                                  int iter_cap = 150) {
  Channel eff = effective_channel(mc, n, s);
  BoundReport rep;
  rep.setting = s;
  rep.n = n;
  rep.kind = kind;
  if (kind == BoundKind::quantum_coherent) {
    CoherentResult cr = maximize_coherent(eff, restarts, seed, iter_cap);
    rep.value_bits_per_use = cr.value / n;
    rep.optimizer_trace = std::move(cr.trace);
  } else {
    int n_states = static_cast<int>(std::min<long>(eff.d_in * eff.d_in, eff.d_in + 2));
    ChiResult cr = maximize_chi(eff, n_states, restarts, seed, iter_cap);
    if (kind == BoundKind::classical_chi) {
      rep.value_bits_per_use = cr.value / n;
    } else {
      rep.value_bits_per_use = private_chi_gap(eff, cr.ensemble) / n;
    }
    rep.optimizer_trace = std::move(cr.trace);
  }
  return rep;
}

//==========================================================================
// Inequality checks
//==========================================================================

struct FannesCheck {
  double lhs = 0.0, rhs = 0.0;
  bool holds = false;
};

inline FannesCheck check_fannes(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw dimension_error("check_fannes: dim mismatch");
  FannesCheck c;
  c.lhs = std::abs(vn_entropy(rho) - vn_entropy(sigma));
  c.rhs = trace_norm(rho.mat - sigma.mat) * std::log2(double(rho.dim())) +
          std::log2(std::exp(1.0)) / std::exp(1.0);
  c.holds = c.lhs <= c.rhs + 1e-12;
  return c;
}

struct DpiCheck {
  double pre_value = 0.0, post_value = 0.0;
  bool holds = false;
};

inline DpiCheck check_dpi(const Channel& post, const Channel& ch, const DensityMatrix& rho) {
  DpiCheck c;
  c.pre_value = coherent_info(ch, rho);
  c.post_value = coherent_info(compose(post, ch), rho);
  c.holds = c.post_value <= c.pre_value + 1e-9;
  return c;
}

struct SandwichCheck {
  double lower = 0.0, mid = 0.0, upper = 0.0;
  bool holds = false;
};

// Dropping the final memory costs chi at most 2 ld dM.
inline SandwichCheck sandwich_check(const MemoryChannel& mc, int n, const Ensemble& e) {
  Channel sn = concatenate(mc, n).step;
  Channel dropped = compose(trace_out_channel(sn.d_out / mc.dM, mc.dM, 1), sn);
  SandwichCheck c;
  c.lower = holevo_chi(dropped, e);
  c.mid = holevo_chi(sn, e);
  c.upper = c.lower + 2.0 * std::log2(double(mc.dM));
  c.holds = (c.lower <= c.mid + 1e-9) && (c.mid <= c.upper + 1e-9);
  return c;
}

}  // namespace memchan
