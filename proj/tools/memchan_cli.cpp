#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memchan/blockcode.hpp"
#include "memchan/causal.hpp"
#include "memchan/klcode.hpp"
#include "memchan/spec_io.hpp"

using namespace memchan;

namespace {

struct Args {
  std::string spec_path, spec_path_b;
  int n = 0, m = 1, l = 1, trials = 8, samples = 32, restarts = 8;
  double tol = 1e-6, rate = 1.0;
  std::uint64_t seed = 0;
  std::string setting = "ab", mu, out, format = "json", kind = "classical";
  long max_dim_flag = 4096;
};

int pick_n(const Args& a, int fallback) {
  if (a.n < 0) throw validation_error("--n must be positive");
  return a.n == 0 ? fallback : a.n;
}

// The report always carries enough provenance to replay the run: seed,
// tolerances, and whatever iteration counts the solvers expose.
ojson base_report(const std::string& command, const Args& a) {
  ojson r;
  r["command"] = command;
  r["inputs"] = ojson::object();
  r["inputs"]["spec"] = a.spec_path;
  r["inputs"]["digest"] = file_digest(a.spec_path);
  r["results"] = ojson::object();
  r["provenance"] = ojson::object();
  r["provenance"]["seed"] = a.seed;
  r["provenance"]["tolerances"] = {{"tol", a.tol}, {"cptp", 1e-8}};
  return r;
}

int emit(const ojson& report, const Args& a, int code,
         const std::vector<std::pair<int, double>>* series = nullptr) {
  std::string text;
  if (a.format == "csv") {
    if (!series)
      throw validation_error("--format csv only applies to commands producing a series");
    text = series_to_csv(*series);
  } else {
    text = report.dump(2) + "\n";
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw validation_error(a.out + ": cannot write");
    f << text;
  }
  return code;
}

std::string spec_kind(const std::string& path) {
  ojson doc = parse_json_file(path);
  return doc.contains("name") ? doc["name"].get<std::string>() : std::string("explicit");
}

ojson dims_json(const MemoryChannel& mc) {
  return {{"dA", mc.dA}, {"dB", mc.dB}, {"dM", mc.dM}};
}

int cmd_describe(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  ojson r = base_report("describe", a);
  r["results"]["kind"] = spec_kind(a.spec_path);
  r["results"]["dims"] = dims_json(mc);
  r["results"]["step"] = {{"d_in", mc.step.d_in},
                          {"d_out", mc.step.d_out},
                          {"kraus_count", mc.step.kraus.size()}};
  r["results"]["cptp_residual"] = cptp_residual(mc.step);
  return emit(r, a, 0);
}

int cmd_concat(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n = pick_n(a, 2);
  MemoryChannel sn = concatenate(mc, n);
  ojson r = base_report("concat", a);
  r["inputs"]["n"] = n;
  r["results"]["dims"] = dims_json(sn);
  r["results"]["step"] = {{"d_in", sn.step.d_in},
                          {"d_out", sn.step.d_out},
                          {"kraus_count", sn.step.kraus.size()}};
  r["results"]["cptp_residual"] = cptp_residual(sn.step);
  return emit(r, a, 0);
}

int cmd_distance(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  MemoryChannel mb = channel_from_file(a.spec_path_b);
  int n = pick_n(a, 1);
  Channel ca = n == 1 ? mc.step : concatenate(mc, n).step;
  Channel cb = n == 1 ? mb.step : concatenate(mb, n).step;
  DiamondOptions opt;
  opt.tol = a.tol;
  DiamondResult dr = diamond_distance(ca, cb, opt);
  ojson r = base_report("distance", a);
  r["inputs"]["spec_b"] = a.spec_path_b;
  r["inputs"]["digest_b"] = file_digest(a.spec_path_b);
  r["inputs"]["n"] = n;
  r["results"]["value"] = dr.value;
  r["results"]["converged"] = dr.converged;
  r["provenance"]["iterations"] = dr.iterations;
  r["provenance"]["solver_brackets"] = {{"upper_certificate", dr.upper_certificate},
                                        {"lower_witness", dr.lower_witness}};
  return emit(r, a, dr.converged ? 0 : 3);
}

int cmd_forgetful_scan(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n_max = pick_n(a, 4);
  DiamondOptions opt;
  opt.tol = a.tol;

  std::vector<std::pair<int, double>> series;
  ojson brackets = ojson::array();
  std::optional<int> forgetful_at;
  bool all_converged = true;
  for (int n = 1; n <= n_max; ++n) {
    DiamondResult dr = diamond_norm(dn_difference(mc, n), opt);
    series.emplace_back(n, dr.value);
    brackets.push_back({{"n", n},
                        {"upper_certificate", dr.upper_certificate},
                        {"lower_witness", dr.lower_witness},
                        {"iterations", dr.iterations},
                        {"converged", dr.converged}});
    if (!forgetful_at && dr.value < 1.0) forgetful_at = n;
    all_converged = all_converged && dr.converged;
  }

  ojson r = base_report("forgetful-scan", a);
  r["inputs"]["n"] = n_max;
  r["results"]["series"] = series_to_json(series);
  r["results"]["forgetful_at"] = forgetful_at ? ojson(*forgetful_at) : ojson(nullptr);

  int contracting = 0;
  for (const auto& [n, d] : series)
    if (d > 1e-100 && d < 1.0) ++contracting;
  if (contracting >= 2) {
    DecaySeries ds;
    ds.points = series;
    r["results"]["fitted_c"] = decay_fit(ds);
  } else {
    r["results"]["fitted_c"] = nullptr;
  }
  r["provenance"]["solver_brackets"] = std::move(brackets);
  return emit(r, a, all_converged ? 0 : 3, &series);
}

int cmd_capacity_bounds(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n_max = pick_n(a, 2);

  CapacitySetting setting = CapacitySetting::ab();
  if (a.setting == "ab") {
    setting = CapacitySetting::ab();
  } else if (a.setting == "ae") {
    setting = CapacitySetting::ae();
  } else if (a.setting == "eb" || a.setting == "ee") {
    if (a.mu.empty())
      throw validation_error("setting " + a.setting + " needs --mu (Eve initializes)");
    DensityMatrix mu = state_from_spec(a.mu, mc.dM);
    setting = a.setting == "eb" ? CapacitySetting::eb(mu) : CapacitySetting::ee(mu);
  } else {
    throw validation_error("unknown setting '" + a.setting + "'");
  }

  BoundKind kind = BoundKind::classical_chi;
  if (a.kind == "classical")
    kind = BoundKind::classical_chi;
  else if (a.kind == "quantum")
    kind = BoundKind::quantum_coherent;
  else if (a.kind == "private")
    kind = BoundKind::private_gap;
  else
    throw validation_error("unknown bound kind '" + a.kind + "'");

  std::vector<std::pair<int, double>> per_n;
  std::size_t trace_len = 0;
  for (int n = 1; n <= n_max; ++n) {
    BoundReport br = capacity_bound(mc, n, setting, kind, a.restarts, a.seed);
    per_n.emplace_back(n, br.value_bits_per_use);
    if (n == n_max) trace_len = br.optimizer_trace.size();
  }

  ojson r = base_report("capacity-bounds", a);
  r["inputs"]["n"] = n_max;
  r["inputs"]["setting"] = a.setting;
  r["inputs"]["kind"] = a.kind;
  if (!a.mu.empty()) r["inputs"]["mu"] = a.mu;
  r["results"]["bits_per_use"] = per_n.back().second;
  r["results"]["per_n"] = series_to_json(per_n);
  r["provenance"]["restarts"] = a.restarts;
  r["provenance"]["iterations"] = trace_len;
  return emit(r, a, 0, &per_n);
}

int cmd_kl_construct(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n = pick_n(a, 1);
  DensityMatrix mu =
      a.mu.empty() ? maximally_mixed(mc.dM) : state_from_spec(a.mu, mc.dM);
  Channel hat = fix_memory_input(mc, mu, n);
  KLCode code = pairing_construct(hat.kraus, a.seed);
  KLVerify verify = kl_verify(hat.kraus, code.code_basis);

  ojson r = base_report("kl-construct", a);
  r["inputs"]["n"] = n;
  r["inputs"]["mu"] = a.mu.empty() ? "maximally_mixed" : a.mu;
  r["results"]["code_dim"] = code.dimension();
  r["results"]["halving_steps"] = code.halving_steps;
  r["results"]["max_step_residual"] = code.max_step_residual;
  r["results"]["verified"] = verify.holds;
  r["results"]["verify_residual"] = verify.max_residual;
  if (!code.diagnostic.empty()) r["results"]["diagnostic"] = code.diagnostic;
  if (code.dimension() > 0) {
    ojson diag = ojson::array();
    for (long i = 0; i < verify.omega.rows(); ++i) diag.push_back(verify.omega(i, i).real());
    r["results"]["omega_diag"] = std::move(diag);
    Channel rec = recovery_channel(hat.kraus, code);
    r["results"]["recovery_fidelity"] = recovery_fidelity(hat.kraus, rec, code.code_basis);
  }
  if (mc.step.kraus.size() == 1) {
    RateDemo demo = pure_channel_rate_demo(mc, mu, n);
    r["results"]["rate_demo"] = {{"code_dim", demo.code_dim},
                                 {"guaranteed_floor", demo.guaranteed_floor},
                                 {"fidelity", demo.fidelity},
                                 {"kraus_count", demo.kraus_count},
                                 {"bits_per_use", std::log2(double(demo.code_dim)) / n}};
  }
  r["provenance"]["tolerances"]["verify"] = 1e-8;
  return emit(r, a, 0);
}

int cmd_block_rate(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  DiamondOptions opt;
  opt.tol = a.tol;
  BlockReduction br = block_reduce(mc, a.m, a.l, {}, opt);
  RateSandwich rs = rate_sandwich(mc, a.m, a.l, a.restarts, a.seed);

  ojson r = base_report("block-rate", a);
  r["inputs"]["m"] = a.m;
  r["inputs"]["l"] = a.l;
  r["results"]["error_rate_per_block"] = br.error_rate_per_block;
  r["results"]["post_guard_memory"] = matrix_to_json(br.post_guard_memory.mat);
  r["results"]["lower"] = rs.lower;
  r["results"]["upper"] = rs.upper;
  r["results"]["chi_block"] = rs.chi_block;
  r["results"]["traced_lower"] = rs.traced_lower;
  r["results"]["traced_upper"] = rs.traced_upper;
  r["results"]["chi_traced"] = rs.chi_traced;
  r["provenance"]["restarts"] = a.restarts;
  r["provenance"]["iterations"] = br.error_iterations;
  r["provenance"]["solver_brackets"] = {{"error_converged", br.error_converged}};
  return emit(r, a, br.error_converged ? 0 : 3);
}

int cmd_causality_check(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n = pick_n(a, 3);
  DensityMatrix mu =
      a.mu.empty() ? maximally_mixed(mc.dM) : state_from_spec(a.mu, mc.dM);
  WindowChannel wc = from_memory_channel(mc, n, mu);

  ojson r = base_report("causality-check", a);
  r["inputs"]["n"] = n;
  r["inputs"]["mu"] = a.mu.empty() ? "maximally_mixed" : a.mu;
  ojson cuts = ojson::array();
  double max_dev = 0.0;
  for (int z = 1; z < n; ++z) {
    CutCheck c = causal_cut_check(wc, z, a.samples, a.seed);
    cuts.push_back({{"z", z},
                    {"deviation", c.deviation},
                    {"basis_complete", c.basis_complete},
                    {"samples_used", c.samples_used}});
    max_dev = std::max(max_dev, c.deviation);
  }
  r["results"]["cuts"] = std::move(cuts);
  r["results"]["max_deviation"] = max_dev;
  r["results"]["causal"] = max_dev <= a.tol;
  r["provenance"]["samples"] = a.samples;
  return emit(r, a, 0);
}

int cmd_sim_code(const Args& a) {
  MemoryChannel mc = channel_from_file(a.spec_path);
  int n = pick_n(a, 3);
  DensityMatrix mu =
      a.mu.empty() ? maximally_mixed(mc.dM) : state_from_spec(a.mu, mc.dM);
  Channel ch = fix_memory_input(mc, mu, 1);
  double success = random_code_sim(ch, n, a.rate, a.trials, a.seed);

  ojson r = base_report("sim-code", a);
  r["inputs"]["n"] = n;
  r["inputs"]["rate"] = a.rate;
  r["inputs"]["mu"] = a.mu.empty() ? "maximally_mixed" : a.mu;
  r["results"]["success"] = success;
  r["results"]["codewords"] = static_cast<long>(std::floor(std::exp2(n * a.rate)));
  r["provenance"]["trials"] = a.trials;
  return emit(r, a, 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for quantum channels with memory"};
  app.require_subcommand(1);
  Args a;

  bool max_dim_given = false;
  auto common = [&](CLI::App* s, bool series_csv = false) {
    s->add_option("--tol", a.tol, "solver tolerance")->capture_default_str();
    s->add_option("--seed", a.seed, "rng seed")->capture_default_str();
    s->add_option("--restarts", a.restarts, "optimizer restarts")->capture_default_str();
    s->add_option("--out", a.out, "write the report to this path instead of stdout");
    s->add_option("--format", a.format, series_csv ? "json or csv (csv emits the series)"
                                                   : "json (csv needs a series command)")
        ->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--max-dim", a.max_dim_flag, "largest matrix dimension to materialize")
        ->capture_default_str()
        ->each([&max_dim_given](const std::string&) { max_dim_given = true; });
  };

  CLI::App* describe = app.add_subcommand("describe", "parse a channel spec and report shape");
  describe->add_option("spec", a.spec_path, "channel spec file")->required();
  common(describe);

  CLI::App* concat = app.add_subcommand("concat", "concatenate n steps and report shape");
  concat->add_option("spec", a.spec_path, "channel spec file")->required();
  concat->add_option("--n", a.n, "steps (default 2)");
  common(concat);

  CLI::App* distance = app.add_subcommand("distance", "diamond distance between two channels");
  distance->add_option("spec", a.spec_path, "first channel spec")->required();
  distance->add_option("spec_b", a.spec_path_b, "second channel spec")->required();
  distance->add_option("--n", a.n, "compare n-step concatenations (default 1)");
  common(distance);

  CLI::App* scan = app.add_subcommand("forgetful-scan", "memory decay series d_n");
  scan->add_option("spec", a.spec_path, "channel spec file")->required();
  scan->add_option("--n", a.n, "largest step count (default 4)");
  common(scan, true);

  CLI::App* capacity = app.add_subcommand("capacity-bounds", "per-n capacity bound series");
  capacity->add_option("spec", a.spec_path, "channel spec file")->required();
  capacity->add_option("--n", a.n, "largest step count (default 2)");
  capacity->add_option("--setting", a.setting, "ab | ae | eb | ee")->capture_default_str();
  capacity->add_option("--kind", a.kind, "classical | quantum | private")
      ->capture_default_str();
  capacity->add_option("--mu", a.mu, "memory state when Eve initializes");
  common(capacity, true);

  CLI::App* kl = app.add_subcommand("kl-construct", "build and verify a correctable code");
  kl->add_option("spec", a.spec_path, "channel spec file")->required();
  kl->add_option("--n", a.n, "block length (default 1)");
  kl->add_option("--mu", a.mu, "memory state fed to the block (default maximally_mixed)");
  common(kl);

  CLI::App* block = app.add_subcommand("block-rate", "guarded block reduction and rate bracket");
  block->add_option("spec", a.spec_path, "channel spec file")->required();
  block->add_option("--m", a.m, "guard steps")->capture_default_str();
  block->add_option("--l", a.l, "payload steps")->capture_default_str();
  common(block);

  CLI::App* causal = app.add_subcommand("causality-check", "cut deviations of the n-site window");
  causal->add_option("spec", a.spec_path, "channel spec file")->required();
  causal->add_option("--n", a.n, "window sites (default 3)");
  causal->add_option("--mu", a.mu, "initial memory state (default maximally_mixed)");
  causal->add_option("--samples", a.samples, "probes when the site basis is too large")
      ->capture_default_str();
  common(causal);

  CLI::App* sim = app.add_subcommand("sim-code", "random-coding success estimate");
  sim->add_option("spec", a.spec_path, "channel spec file")->required();
  sim->add_option("--n", a.n, "code length (default 3)");
  sim->add_option("--rate", a.rate, "bits per use")->capture_default_str();
  sim->add_option("--trials", a.trials, "random codebooks to average")->capture_default_str();
  sim->add_option("--mu", a.mu, "memory state for the single-use channel");
  common(sim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (max_dim_given) set_max_dim(a.max_dim_flag);
    if (app.got_subcommand(describe)) return cmd_describe(a);
    if (app.got_subcommand(concat)) return cmd_concat(a);
    if (app.got_subcommand(distance)) return cmd_distance(a);
    if (app.got_subcommand(scan)) return cmd_forgetful_scan(a);
    if (app.got_subcommand(capacity)) return cmd_capacity_bounds(a);
    if (app.got_subcommand(kl)) return cmd_kl_construct(a);
    if (app.got_subcommand(block)) return cmd_block_rate(a);
    if (app.got_subcommand(causal)) return cmd_causality_check(a);
    if (app.got_subcommand(sim)) return cmd_sim_code(a);
  } catch (const dimension_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
