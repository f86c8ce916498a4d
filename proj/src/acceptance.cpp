#include "maips/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "maips/diagnostics.hpp"
#include "maips/format.hpp"

namespace maips {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Compact number for detail text.
std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

// Rounds to `digits` significant figures.
double round_sig(double v, int digits) {
  if (v == 0.0) return 0.0;
  const double p = std::pow(10.0, digits - 1 - std::floor(std::log10(std::abs(v))));
  return std::round(v * p) / p;
}

std::string runtime_note(double seconds, double limit) {
  return "runtime limit " + num(limit) + " s" + (seconds < limit ? "" : " exceeded");
}

} // namespace

std::string format_check(const CheckResult &r) {
  std::ostringstream os;
  os << r.id << ' ' << (r.pass ? "PASS" : "FAIL") << ' ' << r.detail << " (" << num(r.seconds)
     << " s)";
  return os.str();
}

CheckResult check_detailed_balance(std::uint64_t seed, int pairs) {
  const auto t0 = Clock::now();
  Vector var(4);
  var << 1.0, 0.1, 0.01, 0.001;
  const DiagGaussianTarget target(var);
  const DynamicsSpec spec = DynamicsSpec::aldi(0.05, 0.001);
  const int m = 10;
  std::vector<int> all(m);
  std::iota(all.begin(), all.end(), 0);
  auto ens_log = [&](const Ensemble &e) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += target.log_density(e.row(i).transpose());
    return s;
  };
  double worst = 0.0;
  int nonfinite = 0;
  for (int p = 0; p < pairs; ++p) {
    Ensemble x(m, 4);
    for (int i = 0; i < m; ++i) {
      RngStream s({seed, 0, static_cast<std::uint64_t>(p), 0, static_cast<std::uint64_t>(i),
                   DrawPurpose::Test});
      for (int a = 0; a < 4; ++a) x(i, a) = std::sqrt(var(a)) * s.normal();
    }
    const BlockProposal fwd = block_proposal(spec, target, x, all);
    const Matrix y =
        sample_proposal(fwd, {seed, 0, static_cast<std::uint64_t>(p), 0, 0, DrawPurpose::Proposal});
    const BlockProposal rev = block_proposal(spec, target, y, all);
    const double lx = ens_log(x);
    const double ly = ens_log(y);
    const double qf = proposal_logpdf(fwd, y);
    const double qr = proposal_logpdf(rev, x);
    const double lhs = lx + qf + log_accept(lx, ly, qf, qr);
    const double rhs = ly + qr + log_accept(ly, lx, qr, qf);
    if (!std::isfinite(lhs) || !std::isfinite(rhs)) {
      ++nonfinite;
      continue;
    }
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  CheckResult r;
  r.id = "A1";
  r.seconds = since(t0);
  r.pass = nonfinite == 0 && worst <= 1e-10 && r.seconds < 10.0;
  r.detail = "detailed balance, " + std::to_string(pairs) + " ensemble pairs: max |lhs - rhs| = " +
             num(worst) + " (tol 1e-10), non-finite " + std::to_string(nonfinite) + "; " +
             runtime_note(r.seconds, 10.0);
  return r;
}

CheckResult check_matrix_invariance(const BiasLabResult &b, double seconds) {
  CheckResult r;
  r.id = "A2";
  r.seconds = seconds;
  double worst = 0.0;
  std::string worst_name;
  double sim_min = 1e300;
  for (const auto &k : b.kernels) {
    if (k.kernel == "sim") {
      sim_min = std::min(sim_min, k.residual);
      continue;
    }
    if (!(k.residual <= worst)) {
      worst = k.residual;
      worst_name = k.example + "/" + k.kernel;
    }
  }
  const auto &tri = b.find_sim("triangular");
  const auto &uni = b.find_sim("uniform");
  // "Order 1e-2": within half a decade.
  const double lo = std::pow(10.0, -2.5);
  const double hi = std::pow(10.0, -1.5);
  const bool ok_correct = worst <= 1e-8;
  const bool ok_tri = within(tri.summary.max_rel_joint, 1e-3, 1e-1);
  const bool ok_uni = within(uni.summary.max_rel_marginal, lo, hi);
  r.pass = ok_correct && ok_tri && ok_uni && seconds < 120.0;
  r.detail = "grid invariance: max residual of ew/pw/pw-rs/bw = " + num(worst) + " at " +
             worst_name + " (tol 1e-8); sim residual >= " + num(sim_min) +
             "; triangular sim max rel deviation " + num(tri.summary.max_rel_joint) +
             " (band [1e-3, 1e-1]); uniform sim max marginal bias " +
             num(uni.summary.max_rel_marginal) + " (band [" + num(lo) + ", " + num(hi) + "]); " +
             runtime_note(seconds, 120.0);
  return r;
}

CheckResult check_discrete_example() {
  const auto t0 = Clock::now();
  const Vector pi = Vector::Constant(2, 0.5);
  const Matrix printed = printed_two_state_psim();
  const Vector nu = invariant_measure(printed);
  Vector expect(4);
  expect << 45.0, 49.0, 35.0, 44.0;
  expect /= 173.0;
  const auto [m1, m2] = pair_marginals(nu, 2);
  Vector e1(2), e2(2);
  e1 << 94.0 / 173.0, 79.0 / 173.0;
  e2 << 80.0 / 173.0, 93.0 / 173.0;
  const double err_nu = (nu - expect).cwiseAbs().maxCoeff();
  const double err_m = std::max((m1 - e1).cwiseAbs().maxCoeff(), (m2 - e2).cwiseAbs().maxCoeff());

  const Matrix built = build_discrete_psim(two_state_proposals(), pi).psim;
  const auto [o1, o2] = pair_marginals(one_step_from_product(built, pi), 2);
  const double err_one =
      std::max((o1 - pi).cwiseAbs().maxCoeff(), (o2 - pi).cwiseAbs().maxCoeff());

  CheckResult r;
  r.id = "A3";
  r.seconds = since(t0);
  r.pass = err_nu <= 1e-12 && err_m <= 1e-12 && err_one <= 1e-14 && r.seconds < 1.0;
  r.detail = "two-state example: |nu - (45,49,35,44)/173| = " + num(err_nu) +
             ", marginal error " + num(err_m) + " (tol 1e-12); one-step marginal error " +
             num(err_one) + " (tol 1e-14); " + runtime_note(r.seconds, 1.0);
  return r;
}

CheckResult check_bimodal(const Exp1Result &e, double seconds) {
  struct Band {
    std::string method;
    double centre;
    double width;
  };
  const std::vector<Band> bands = {{"aldi", 0.70, 0.10}, {"svgd", 0.53, 0.15}, {"cbs", 0.52, 0.15}};
  CheckResult r;
  r.id = "A4";
  r.seconds = seconds;
  bool pass = seconds < 180.0;
  std::string detail = "bimodal:";
  for (const auto &b : bands) {
    const Exp1Run &adj = e.find(b.method, "ew");
    const Exp1Run &ua = e.find(b.method, "ua");
    const bool ok_rate = !adj.failed && within(adj.acceptance, b.centre - b.width, b.centre + b.width);
    const bool ok_tv = !adj.failed && adj.tv_distance < 0.08;
    const bool ok_ratio = !adj.failed && ua.tv_distance >= 2.0 * adj.tv_distance;
    pass = pass && ok_rate && ok_tv && ok_ratio;
    detail += " " + b.method + "[acc " + num(adj.acceptance) + (ok_rate ? "" : "!") + " in " +
              num(b.centre) + "+-" + num(b.width) + ", tv " + num(adj.tv_distance) +
              (ok_tv ? "" : "!") + " < 0.08, ua tv " + num(ua.tv_distance) +
              (ua.failed ? " (diverged)" : "") + (ok_ratio ? "" : "!") + " >= 2x]";
  }
  r.pass = pass;
  r.detail = detail + "; " + runtime_note(seconds, 180.0);
  return r;
}

CheckResult check_gaussian_quantile(const Exp2Result &e, double seconds) {
  CheckResult r;
  r.id = "A5";
  r.seconds = seconds;
  const double acc = e.mean_acceptance("aldi-ew");
  const double acc_p = e.mean_acceptance("pmala-pw");
  const double est = e.mean_estimate("aldi-ew");
  const double ia_ew = e.mean_int_ac("aldi-ew");
  const double ia_p = e.mean_int_ac("pmala-pw");
  const double ratio = ia_p / ia_ew;

  std::vector<std::string> bw;
  for (const auto &l : e.labels()) {
    if (l.rfind("aldi-bw", 0) == 0) bw.push_back(l);
  }
  int ordered = 0;
  for (const auto &rep : e.replicas) {
    const double pw = rep.find("aldi-pw").int_ac;
    const double ew = rep.find("aldi-ew").int_ac;
    bool ok = pw <= ew;
    for (const auto &l : bw) {
      const double b = rep.find(l).int_ac;
      ok = ok && pw <= b && b <= ew;
    }
    if (ok) ++ordered;
  }
  const int reps = static_cast<int>(e.replicas.size());
  const bool ok_acc = within(acc, 0.45, 0.55) && within(acc_p, 0.45, 0.55);
  const bool ok_est = std::abs(est - 0.5) <= 0.02;
  const bool ok_ratio = ratio >= 3.0;
  const bool ok_order = 10 * ordered >= 8 * reps;
  r.pass = ok_acc && ok_est && ok_ratio && ok_order && seconds < 600.0;
  r.detail = "4D Gaussian, " + std::to_string(reps) + " replicas: aldi-ew acc " + num(acc) +
             ", pmala-pw acc " + num(acc_p) + " (0.5+-0.05)" + (ok_acc ? "" : "!") +
             "; mean P_N " + num(est) + " (0.5+-0.02)" + (ok_est ? "" : "!") +
             "; int_ac pmala/aldi-ew " + num(ia_p) + "/" + num(ia_ew) + " = " + num(ratio) +
             " (>= 3)" + (ok_ratio ? "" : "!") + "; pw <= bw <= ew in " +
             std::to_string(ordered) + "/" + std::to_string(reps) + " (>= 80%)" +
             (ok_order ? "" : "!") + "; " + runtime_note(seconds, 600.0);
  return r;
}

CheckResult check_cost_table() {
  const auto t0 = Clock::now();
  struct Column {
    const char *name;
    double b;
    std::vector<double> printed;  // cores 1, 20, 50, 100
  };
  const std::vector<double> cores = {1, 20, 50, 100};
  const std::vector<Column> table = {
      {"ew", 100, {1366, 68.3, 27.3, 13.7}},
      {"bw50", 50, {840.6, 42, 16.8, 16.8}},
      {"bw25", 25, {708.1, 35.4, 28.3, 28.3}},
      {"pw", 1, {593.2, 593.2, 593.2, 593.2}},
      {"pmala", 100, {8996, 449.8, 179.9, 90}},
  };
  // Units as in the table: the product int_ac * N * M is given at one core.
  const double n = 1e5;
  const double m = 100;
  int mismatches = 0;
  std::string bad;
  for (const auto &c : table) {
    const double int_ac = c.printed[0] / (n * m);
    for (std::size_t k = 0; k < cores.size(); ++k) {
      const double v = efficiency_cost(int_ac, n, m, c.b, cores[k]);
      if (round_sig(v, 3) != round_sig(c.printed[k], 3)) {
        ++mismatches;
        bad += std::string(" ") + c.name + "@" + num(cores[k]) + "=" + num(v);
      }
    }
  }
  CheckResult r;
  r.id = "A6";
  r.seconds = since(t0);
  r.pass = mismatches == 0;
  r.detail = "cost table: " + std::to_string(table.size() * cores.size() - mismatches) + "/" +
             std::to_string(table.size() * cores.size()) + " entries agree to 3 significant figures" +
             bad;
  return r;
}

CheckResult check_inverse_problem(const Exp3Result &e, double seconds) {
  CheckResult r;
  r.id = "A7";
  r.seconds = seconds;
  const Exp3Chain &aldi = e.find("aldi-ew");
  const Exp3Chain &pmala = e.find("pmala-pw");
  const double z = aldi.max_z(e.problem->posterior_mean);
  const double ia = aldi.ball_int_ac;
  const double ip = pmala.ball_int_ac;
  const bool ok_z = z <= 3.0;
  const bool ok_ia = ia < ip;
  r.pass = ok_z && ok_ia && seconds < 300.0;
  r.detail = "inverse problem: aldi-ew max |mean - m*| / se = " + num(z) + " (<= 3)" +
             (ok_z ? "" : "!") + "; int_ac of the ball indicator aldi-ew " + num(ia) + " < pmala-pw " + num(ip) +
             (ok_ia ? "" : "!") + "; acc aldi " + num(aldi.acceptance) + ", pmala " +
             num(pmala.acceptance) + "; " + runtime_note(seconds, 300.0);
  return r;
}

CheckResult check_gradients(const Config &cfg, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Vector var(4);
  var << 1.0, 0.1, 0.01, 0.001;
  const auto problem = std::make_shared<const LinearGaussianIP>(exp3_problem(cfg));
  struct Case {
    std::string name;
    std::shared_ptr<const Target> target;
    Vector scale;  // std of the sampling distribution for test points
  };
  const std::vector<Case> cases = {
      {"bimodal", std::make_shared<BimodalTarget>(0.1, 0.8), Vector::Constant(1, 1.5)},
      {"gaussian4d", std::make_shared<DiagGaussianTarget>(var), var.cwiseSqrt()},
      {"inverse_problem", std::make_shared<GaussianPosteriorTarget>(problem),
       problem->prior_variances.cwiseSqrt()},
  };
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto &cs = cases[c];
    for (int p = 0; p < 100; ++p) {
      RngStream s({seed, c, static_cast<std::uint64_t>(p), 1, 0, DrawPurpose::Test});
      Vector x(cs.scale.size());
      for (Eigen::Index a = 0; a < x.size(); ++a) x(a) = cs.scale(a) * s.normal();
      const Vector g = cs.target->gradient(x);
      const Vector fd = finite_difference_gradient(*cs.target, x, 1e-6);
      const double rel = (g - fd).norm() / std::max(g.norm(), 1e-300);
      if (!(rel <= worst)) {
        worst = rel;
        worst_name = cs.name;
      }
    }
  }
  CheckResult r;
  r.id = "A8";
  r.seconds = since(t0);
  r.pass = worst <= 1e-5 && r.seconds < 5.0;
  r.detail = "gradients vs central differences at 100 points per target: max relative error " +
             num(worst) + " (" + worst_name + ", tol 1e-5); " + runtime_note(r.seconds, 5.0);
  return r;
}

CheckResult check_analytic(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const double median = chi2_quantile(0.5, 2.0);
  const double err = std::abs(median - 2.0 * std::log(2.0));
  const double phi = 0.8;
  const int n = 1000000;
  std::vector<double> s(n);
  RngStream rng({seed, 0, 0, 0, 0, DrawPurpose::Test});
  double x = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (int i = 0; i < n; ++i) {
    x = phi * x + rng.normal();
    s[i] = x;
  }
  const double ia = integrated_autocorr_series(s).int_ac;
  const double exact = (1.0 + phi) / (1.0 - phi);
  const double rel = std::abs(ia - exact) / exact;
  CheckResult r;
  r.id = "A9";
  r.seconds = since(t0);
  r.pass = err <= 1e-10 && rel <= 0.15;
  r.detail = "chi2(2) median error " + num(err) + " (tol 1e-10); AR(1) int_ac " + num(ia) +
             " vs " + num(exact) + ", rel " + num(rel) + " (tol 0.15)";
  return r;
}

std::vector<CheckResult> run_suite(const SuiteOptions &o,
                                   const std::function<void(const CheckResult &)> &report) {
  const std::uint64_t seed = o.config.get_u64("run.seed");
  auto wanted = [&](const std::string &id) {
    return o.only.empty() || std::find(o.only.begin(), o.only.end(), id) != o.only.end();
  };
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r) {
    if (report) report(r);
    out.push_back(std::move(r));
  };
  auto timed = [](auto &&fn) {
    const auto t0 = Clock::now();
    auto result = fn();
    return std::pair{std::move(result), since(t0)};
  };

  if (wanted("A1")) add(check_detailed_balance(seed));
  if (wanted("A2")) {
    auto [b, s] = timed([&] { return run_bias_lab(o.config, o.workers); });
    if (o.out) publish(o.config, *o.out, b);
    add(check_matrix_invariance(b, s));
  }
  if (wanted("A3")) add(check_discrete_example());
  if (wanted("A4")) {
    auto [e, s] = timed([&] { return run_exp1(o.config, o.workers); });
    if (o.out) publish(o.config, *o.out, e);
    add(check_bimodal(e, s));
  }
  if (wanted("A5")) {
    auto [e, s] = timed([&] { return run_exp2(o.config, o.workers); });
    if (o.out) publish(o.config, *o.out, e);
    add(check_gaussian_quantile(e, s));
  }
  if (wanted("A6")) add(check_cost_table());
  if (wanted("A7")) {
    auto [e, s] = timed([&] { return run_exp3(o.config, o.workers); });
    if (o.out) publish(o.config, *o.out, e);
    add(check_inverse_problem(e, s));
  }
  if (wanted("A8")) add(check_gradients(o.config, seed));
  if (wanted("A9")) add(check_analytic(seed));
  return out;
}

} // namespace maips
