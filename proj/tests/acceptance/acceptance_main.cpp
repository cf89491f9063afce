// Acceptance suite: one test case per criterion, each printing a pass/fail
// line with the measured quantities.

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "mmv/diagnostics.hpp"
#include "mmv/io.hpp"
#include "mmv/measure.hpp"
#include "mmv/scenario.hpp"
#include "mmv/solver.hpp"

using namespace mmv;
namespace fs = std::filesystem;

namespace {

bool report(int num, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << (num < 10 ? "0" : "") << num
            << " " << name << " - " << detail << std::endl;
  return pass;
}

std::string scen_dir() {
  const char* env = std::getenv("MMV_SCENARIO_DIR");
  REQUIRE(env != nullptr);
  return env;
}

Scenario load(const std::string& file,
              const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  ConfigMap cfg = ConfigMap::parse_file(scen_dir() + "/" + file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return build_scenario(cfg);
}

const std::vector<std::string> kCatalog = {
    "reflected_bm_desk.cfg", "linear_meanfield.cfg", "attraction_picard.cfg",
    "osgood_box.cfg",        "pure_jump.cfg",        "jump_reflected.cfg"};

Vec v1(double a) {
  Vec v(1);
  v[0] = a;
  return v;
}

bool corrupt_one_step(SolutionEnsemble& ens) {
  const int m = ens.steps();
  for (int p = 0; p < ens.particles; ++p) {
    for (int k = 0; k < m; ++k) {
      const size_t at = static_cast<size_t>(p) * m + k;
      if (ens.s5[at] > 1e-3) {
        ens.s1[at] = -ens.s1[at];
        for (int a = 0; a < ens.dim; ++a) ens.s3[at * ens.dim + a] = -ens.s3[at * ens.dim + a];
        return true;
      }
    }
  }
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string g17(double v) { return fmt_g17(v); }

}  // namespace

TEST_CASE("criterion 01: reflected Brownian motion mean") {
  const Scenario sc = load("reflected_bm.cfg");
  const auto t0 = std::chrono::steady_clock::now();
  const SolutionEnsemble ens = simulate(sc.kernel, sc.op, sc.levy, sc.scheme, sc.seed);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double mean = ens.law_summary.back().mean[0];
  const int n = sc.scheme.particles;
  // sample standard error of the ensemble mean at t = 1
  double sq = 0.0;
  const int last = static_cast<int>(ens.snapshots.size()) - 1;
  for (int p = 0; p < n; ++p) {
    const double x = ens.state(last, p)[0];
    sq += (x - mean) * (x - mean);
  }
  const double se = std::sqrt(sq / n / n);
  const double target = 0.7978846;
  const double tol = 3.0 * se + 0.01;
  const double err = std::abs(mean - target);

  const bool time_ok = elapsed < 60.0;
  const bool mean_ok = err <= tol;
  // The resolvent scheme is the discrete Skorokhod (Lindley) recursion, whose
  // mean carries the intrinsic discrete-maximum deficit ~0.5826*sqrt(h) =
  // 0.0184 at h = 1e-3 (Asmussen-Glynn-Pitman), which exceeds this tolerance;
  // the check is evaluated at face value and reports the measured gap.
  const bool pass = report(
      1, "reflected BM mean",
      mean_ok && time_ok,
      "mean=" + g17(mean) + " target=" + g17(target) + " |err|=" + g17(err) + " tol(3SE+0.01)=" +
          g17(tol) + " runtime=" + g17(elapsed) + "s" +
          (mean_ok ? "" : " [expected: scheme bias ~0.5826*sqrt(h)=0.0184 exceeds allowance]"));
  CHECK(time_ok);
  CHECK(pass == (mean_ok && time_ok));
  CHECK(mean_ok);
}

TEST_CASE("criterion 02: discrete variational inequality on all catalog scenarios") {
  bool all_pass = true;
  double worst = 0.0;
  bool adversarial_ok = true;
  for (const auto& file : kCatalog) {
    const Scenario sc = load(file, {{"study.type", "simulate"},
                                    {"scheme.particles", "200"},
                                    {"scheme.h", "0.02"},
                                    {"output.snapshot_stride", "1"},
                                    {"output.step_stats", "true"}});
    SolutionEnsemble ens = simulate(sc.kernel, sc.op, sc.levy, sc.scheme, sc.seed);
    const auto pairs = graph_sample(sc.op, 50, 4.0, sc.seed + 1);
    const auto rep = check_pair_in_A(ens, pairs, 1e-9);
    all_pass &= rep.pass;
    worst = std::min(worst, rep.worst_margin);
    if (corrupt_one_step(ens)) {
      const auto bad = check_pair_in_A(ens, pairs, 1e-9);
      adversarial_ok &= !bad.pass;
    }
  }
  const bool pass = report(2, "variational inequality (A membership)", all_pass && adversarial_ok,
                           "worst margin=" + g17(worst) + " over " +
                               std::to_string(kCatalog.size()) +
                               " scenarios; sign-flip mutants rejected=" +
                               (adversarial_ok ? "yes" : "NO"));
  CHECK(pass);
}

TEST_CASE("criterion 03: W2 exactness against permutation brute force") {
  auto brute = [](const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double cost = 0.0;
      for (int i = 0; i < a.size(); ++i) cost += (a.point(i) - b.point(perm[i])).squaredNorm();
      best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / a.size());
  };
  auto random_cloud = [](uint64_t seed, uint32_t idx, int n, int d) {
    CounterStream st(seed, idx, 0, channel::sampler);
    std::vector<Vec> pts;
    for (int i = 0; i < n; ++i) {
      Vec p(d);
      for (int a = 0; a < d; ++a) p[a] = 2.0 * st.normal();
      pts.push_back(p);
    }
    return EmpiricalMeasure(std::move(pts));
  };
  double worst_assign = 0.0, worst_1d = 0.0;
  int idx = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rep % 7;
    const int d = 1 + rep % 3;
    const auto a = random_cloud(1000, idx++, n, d);
    const auto b = random_cloud(1001, idx++, n, d);
    const double exact = wasserstein2(a, b, W2Method::exact_assignment);
    worst_assign = std::max(worst_assign, std::abs(exact - brute(a, b)));
    if (d == 1)
      worst_1d = std::max(worst_1d,
                          std::abs(exact - wasserstein2(a, b, W2Method::exact_1d)));
  }
  const bool pass = report(3, "W2 correctness", worst_assign < 1e-10 && worst_1d < 1e-10,
                           "max |assignment-brute|=" + g17(worst_assign) +
                               ", max |1d-assignment|=" + g17(worst_1d));
  CHECK(pass);
}

TEST_CASE("criterion 04: mollifier fidelity") {
  // (a) kernel mass via the configured quadrature
  double worst_mass = 0.0;
  for (int dim : {1, 2})
    for (int n : {1, 4, 16})
      worst_mass = std::max(worst_mass, std::abs(MollifierConfig(n, dim).mass_estimate() - 1.0));
  const bool mass_ok = worst_mass < 1e-6;

  // (b) per catalog kernel: sup-grid error nonincreasing in n and < 1e-2 at 32
  const std::vector<std::pair<std::string, CoefficientKernel>> kernels = {
      {"linear", load("linear_meanfield.cfg").kernel},
      {"attraction", load("attraction_picard.cfg").kernel},
      {"osgood", load("osgood_box.cfg").kernel}};
  const EmpiricalMeasure mu({v1(-1.5), v1(-0.2), v1(0.4), v1(1.1)});
  const MeasureSummary sm = summarize(mu);
  bool err_ok = true;
  double osgood_err32 = 0.0;
  for (const auto& [name, kern] : kernels) {
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {2, 4, 8, 16, 32}) {
      const auto moll = mollify(kern, MollifierConfig(n, 1), 2.5);
      double sup = 0.0;
      for (int i = 0; i < 100; ++i) {
        const Vec x = v1(-2.0 + 4.0 * i / 99.0);
        sup = std::max(sup, (moll.drift_mf(x, sm) - kern.drift_mf(x, sm)).norm());
      }
      err_ok &= sup <= prev + 1e-12;
      prev = sup;
      if (n == 32) {
        err_ok &= sup < 1e-2;
        if (name == "osgood") osgood_err32 = sup;
      }
    }
  }

  // (c) sampled Lipschitz quotient log-log slope <= d + 1.5
  bool slope_ok = true;
  double worst_slope = 0.0;
  for (const auto& [name, kern] : kernels) {
    std::vector<double> ln, ll;
    for (int n : {2, 4, 8, 16, 32}) {
      const auto moll = mollify(kern, MollifierConfig(n, 1), 1.5);
      CounterStream st(21, 0, 0, channel::sampler);
      double lip = 0.0;
      for (int i = 0; i < 2000; ++i) {
        const double x = 2.0 * (st.u01() - 0.5);
        const double delta = std::pow(10.0, -6.0 + 5.0 * st.u01());
        lip = std::max(lip, std::abs(moll.drift(v1(x + delta), v1(0))[0] -
                                     moll.drift(v1(x), v1(0))[0]) /
                                delta);
      }
      ln.push_back(std::log(static_cast<double>(n)));
      ll.push_back(std::log(lip));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int k = static_cast<int>(ln.size());
    for (int i = 0; i < k; ++i) {
      sx += ln[i];
      sy += ll[i];
      sxx += ln[i] * ln[i];
      sxy += ln[i] * ll[i];
    }
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    worst_slope = std::max(worst_slope, slope);
    slope_ok &= slope <= 1.0 + 1.5;
  }

  const bool pass = report(4, "mollifier fidelity", mass_ok && err_ok && slope_ok,
                           "max |mass-1|=" + g17(worst_mass) + ", osgood sup err(n=32)=" +
                               g17(osgood_err32) + ", worst Lip slope=" + g17(worst_slope));
  CHECK(pass);
}

TEST_CASE("criterion 05: moment bound stability under particle doubling") {
  bool all_ok = true;
  std::string details;
  for (const auto& file : kCatalog) {
    double stat_n = 0.0, stat_2n = 0.0;
    for (uint64_t seed = 901; seed < 906; ++seed) {
      for (const int n : {1000, 2000}) {
        const Scenario sc = load(file, {{"study.type", "simulate"},
                                        {"scheme.particles", std::to_string(n)},
                                        {"output.snapshot_stride", "10"},
                                        {"output.step_stats", "false"},
                                        {"seed", std::to_string(seed)}});
        const auto ens = simulate(sc.kernel, sc.op, sc.levy, sc.scheme, sc.seed);
        (n == 1000 ? stat_n : stat_2n) += ens.moment_statistic() / 5.0;
      }
    }
    const double rel = std::abs(stat_2n - stat_n) / std::max(stat_n, 1e-12);
    all_ok &= std::isfinite(stat_n) && std::isfinite(stat_2n) && rel < 0.10;
    details += file.substr(0, file.find('.')) + "=" + g17(rel) + " ";
  }
  const bool pass = report(5, "moment stability (N doubling)", all_ok, "rel changes: " + details);
  CHECK(pass);
}

TEST_CASE("criterion 06: Picard convergence on the attraction scenario") {
  const Scenario sc = load("attraction_picard.cfg");
  const auto res = picard_solve(sc.kernel, sc.op, sc.levy, sc.scheme, sc.study.picard, sc.seed);
  bool ratios_ok = true;
  for (size_t k = 1; k < res.gaps.size(); ++k)
    if (res.gaps[k - 1] > sc.study.picard.w2_tol)
      ratios_ok &= res.gaps[k] / res.gaps[k - 1] < 0.8;
  std::string trace;
  for (double g : res.gaps) trace += g17(g) + " ";
  const bool pass = report(6, "Picard convergence",
                           res.converged && res.iterations <= 15 && ratios_ok,
                           "gaps: " + trace + "(converged in " + std::to_string(res.iterations) +
                               " iterations)");
  CHECK(pass);
}

TEST_CASE("criterion 07: mollified cascade on the osgood scenario") {
  bool monotone_ok = true, majorant_ok = true;
  std::string detail;
  for (uint64_t seed = 100; seed < 105; ++seed) {
    const Scenario sc = load("osgood_box.cfg", {{"seed", std::to_string(seed)}});
    const auto res = mollified_cascade(sc.kernel, sc.op, sc.levy, sc.scheme,
                                       sc.study.cascade_levels, sc.seed, Quadrature{},
                                       sc.study.cascade_halfwidth);
    for (size_t i = 1; i < res.e.size(); ++i) monotone_ok &= res.e[i] <= res.e[i - 1];
    for (const auto& curve : res.curves) {
      const auto fit = fit_osgood_majorant(res.grid, curve, PsiKind::linear_plus_log);
      majorant_ok &= fit.dominates;
    }
    if (seed == 100) {
      detail = "e: ";
      for (double e : res.e) detail += g17(e) + " ";
    }
  }
  const bool pass = report(7, "mollified cascade", monotone_ok && majorant_ok,
                           detail + (majorant_ok ? "(curves below fitted majorants)"
                                                 : "(majorant violated)"));
  CHECK(pass);
}

TEST_CASE("criterion 08: pathwise determinism and linear contraction") {
  const Scenario sc = load("coupled_contraction.cfg");
  const auto same = coupled_run(sc.kernel, sc.op, sc.levy, sc.scheme, v1(0.4), v1(0.4), sc.seed);
  bool zero_ok = same.identical;
  for (double g : same.g) zero_ok &= g == 0.0;

  const double delta = 0.5;
  const auto res = coupled_run(sc.kernel, sc.op, sc.levy, sc.scheme, v1(0.0), v1(delta), sc.seed);
  bool contract_ok = true;
  double worst_rel = 0.0;
  for (size_t t = 0; t < res.grid.size(); t += 100) {
    const double want = delta * delta * std::exp(-2.0 * res.grid[t]);
    const double rel = std::abs(res.g[t] - want) / want;
    worst_rel = std::max(worst_rel, rel);
    contract_ok &= rel < 0.05;
  }
  const bool pass = report(8, "pathwise uniqueness / contraction", zero_ok && contract_ok,
                           std::string("identical-start gap bit-exact zero=") +
                               (zero_ok ? "yes" : "NO") + ", worst rel err vs d^2 e^{-2t}=" +
                               g17(worst_rel));
  CHECK(pass);
}

TEST_CASE("criterion 09: martingale defect tables") {
  const double h = 0.01;
  const std::vector<TestFunction> fs = {
      TestFunction::bump(v1(0.0), 2.0), TestFunction::bump(v1(0.5), 1.5),
      TestFunction::bump(v1(-0.3), 2.5), TestFunction::quadratic_window(2.0, 3.0, 1)};
  const std::vector<std::pair<double, double>> pairs = {{0.2, 0.4}, {0.2, 0.7}, {0.3, 0.6},
                                                        {0.4, 0.8}, {0.5, 1.0}, {0.6, 0.9}};
  const std::vector<GammaFunctional> gammas = {{"const", {}, false},
                                               {"clip_s", {1.0}, true},
                                               {"clip_half_s", {0.5}, true},
                                               {"clip_product", {1.0, 0.5}, true}};

  // Brownian scenario: A = 0, b = 0, sigma = 1
  const auto bres = load("reflected_bm_desk.cfg",
                         {{"study.type", "simulate"},
                          {"operator.type", "zero"},
                          {"scheme.particles", "10000"},
                          {"scheme.h", g17(h)}});
  const auto bens = simulate(bres.kernel, bres.op, bres.levy, bres.scheme, bres.seed);
  const auto btable = martingale_defect(bens, fs, bres.kernel, bres.levy, pairs, gammas,
                                        GeneratorForm::compensator);
  double c = 0.0;
  for (const auto& e : btable) c = std::max(c, (std::abs(e.defect) - 3.0 * e.se) / h);
  bool brown_ok = true;
  for (const auto& e : btable) brown_ok &= std::abs(e.defect) <= 3.0 * e.se + c * h + 1e-15;
  const bool c_sane = c < 5.0;

  // pure-jump scenario under the compensator form with the same c
  const auto jsc = load("pure_jump.cfg", {{"scheme.particles", "10000"}, {"scheme.h", g17(h)}});
  const auto jens = simulate(jsc.kernel, jsc.op, jsc.levy, jsc.scheme, jsc.seed);
  const auto jtable =
      martingale_defect(jens, fs, jsc.kernel, jsc.levy, pairs, gammas, GeneratorForm::compensator);
  bool jump_ok = true;
  double worst_jump_excess = 0.0;
  for (const auto& e : jtable) {
    worst_jump_excess = std::max(worst_jump_excess, std::abs(e.defect) - (3.0 * e.se + c * h));
    jump_ok &= std::abs(e.defect) <= 3.0 * e.se + c * h;
  }

  const bool pass = report(9, "martingale defect",
                           brown_ok && c_sane && jump_ok,
                           "entries=" + std::to_string(btable.size()) + "+" +
                               std::to_string(jtable.size()) + ", fitted c=" + g17(c) +
                               ", worst jump excess=" + g17(worst_jump_excess));
  CHECK(pass);
}

TEST_CASE("criterion 10: Aldous moduli and tails on all catalog scenarios") {
  const std::vector<double> deltas = {0.2, 0.1, 0.05, 0.02};
  bool all_ok = true;
  for (const auto& file : kCatalog) {
    std::vector<double> avg_mod(deltas.size(), 0.0);
    std::vector<double> avg_tail;
    for (uint64_t seed = 700; seed < 710; ++seed) {
      const Scenario sc = load(file, {{"study.type", "simulate"},
                                      {"scheme.particles", "500"},
                                      {"output.step_stats", "false"},
                                      {"seed", std::to_string(seed)}});
      const auto ens = simulate(sc.kernel, sc.op, sc.levy, sc.scheme, sc.seed);
      const auto rep = aldous_modulus(ens, deltas, 0.5);
      for (size_t i = 0; i < deltas.size(); ++i) avg_mod[i] += rep.modulus[i] / 10.0;
      if (avg_tail.empty()) avg_tail.assign(rep.tail_p.size(), 0.0);
      for (size_t i = 0; i < rep.tail_p.size(); ++i) avg_tail[i] += rep.tail_p[i] / 10.0;
    }
    for (size_t i = 1; i < avg_mod.size(); ++i) all_ok &= avg_mod[i] <= avg_mod[i - 1] + 1e-12;
    for (size_t i = 1; i < avg_tail.size(); ++i) all_ok &= avg_tail[i] <= avg_tail[i - 1] + 1e-12;
    all_ok &= avg_tail.back() < 0.01;  // Chebyshev at a = 10 sqrt(1 + E sup|X|^2)
  }
  const bool pass = report(10, "Aldous moduli and tails", all_ok,
                           "monotone over deltas {0.2,0.1,0.05,0.02} and tail ladder, " +
                               std::to_string(kCatalog.size()) + " scenarios x 10 seeds");
  CHECK(pass);
}

TEST_CASE("criterion 11: byte-identical outputs across worker counts") {
  const char* cli = std::getenv("MMV_CLI");
  REQUIRE(cli != nullptr);
  bool all_ok = true;
  for (const std::string scen : {"linear_meanfield.cfg", "jump_reflected.cfg"}) {
    std::vector<std::string> blobs;
    for (int workers : {1, 2, 8}) {
      const fs::path dir =
          fs::temp_directory_path() / ("mmv_accept_w" + std::to_string(workers));
      fs::remove_all(dir);
      const std::string cmd = std::string(cli) + " run " + scen_dir() + "/" + scen + " --out " +
                              dir.string() + " --workers " + std::to_string(workers) +
                              " --particles 400 > /dev/null 2>&1";
      REQUIRE(std::system(cmd.c_str()) == 0);
      std::string blob;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) blob += f.filename().string() + "\n" + slurp(f);
      blobs.push_back(std::move(blob));
    }
    all_ok &= blobs[0] == blobs[1] && blobs[0] == blobs[2];
  }
  const bool pass = report(11, "reproducibility across workers", all_ok,
                           "2 scenarios x workers {1,2,8}, all artifact bytes compared");
  CHECK(pass);
}
