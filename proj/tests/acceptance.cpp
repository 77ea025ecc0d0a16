// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any line fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "dep/harness.hpp"

using namespace dep;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = DEP_CONFIG_DIR;

json read_json(const std::string& name) {
  std::ifstream in(kConfigs + "/" + name);
  return json::parse(in);
}

ExperimentConfig config(const json& j) { return parse_config(j, kConfigs); }
ExperimentConfig config(const char* name) { return load_config(kConfigs + "/" + std::string(name)); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

double pi() { return std::numbers::pi; }

// ---- 1

Outcome hebb_fixed_point() {
  Simulation sim(config("hebb.json"));
  sim.run();
  const auto& a = sim.agent(0);
  const VectorXd x = sim.plant().read();
  const double alpha = x.dot(a.y_prev) / x.dot(a.raw * x);
  const double r = alpha > 0 ? hebb_residual(a.raw, x, alpha) : INFINITY;
  return {r < 1e-4, fmt("residual %.3g at t=%.1f s (alpha %.4g, |x|^2 %.4g)", r, sim.time(), alpha, x.squaredNorm())};
}

// ---- 2

Outcome rule_comparison() {
  const RunLog dep = run_experiment(config("rule-comparison-dep.json"));
  const RunLog dhl = run_experiment(config("rule-comparison-dhl.json"));
  const double copy = 10.0, pert = 45.0;

  int dhl_bad = 0, dep_min = 1 << 30;
  double dhl_settled = copy;
  int dhl_max = 0;
  double ratio = 0;  // second over first modulus, from 10 s after the copy
  for (const auto* w : dhl.weights_for(0)) {
    if (w->time < copy) continue;
    const auto& e = w->spectrum.eigenvalues;
    if (w->time >= copy + 10.0) ratio = std::max(ratio, std::abs(e(1)) / std::abs(e(0)));
    const int c = nonzero_count(w->spectrum);
    dhl_max = std::max(dhl_max, c);
    if (c != 1) {
      ++dhl_bad;
      dhl_settled = w->time + dhl.dt * 25;
    }
  }
  for (const auto* w : dep.weights_for(0))
    if (w->time >= copy) dep_min = std::min(dep_min, nonzero_count(w->spectrum));

  auto rotation = [&](const RunLog& log) {
    const WeightSample *before = nullptr, *after = log.weights_for(0).back();
    for (const auto* w : log.weights_for(0))
      if (w->time < pert) before = w;
    return principal_angle(before->spectrum.vectors.at(0), after->spectrum.vectors.at(0));
  };
  const double rot_dep = rotation(dep), rot_dhl = rotation(dhl);
  const bool pass = dhl_bad == 0 && dep_min >= 3 && rot_dep > 0.2 && rot_dhl < 0.05;
  return {pass, fmt("DHL samples with !=1 eigenvalue after copy: %d (max count %d, single from t=%.1f s, "
                    "max |l2|/|l1| after 20 s %.2g); DEP min count %d; rotation DEP %.3f rad DHL %.4f rad",
                    dhl_bad, dhl_max, dhl_settled, ratio, dep_min, rot_dep, rot_dhl)};
}

// ---- 3

Outcome kappa_threshold() {
  json j = read_json("chain-kick.json");
  const RunLog low = run_experiment(config(set_path(j, "plasticity.kappa", 0.2)));
  const RunLog high = run_experiment(config(set_path(j, "plasticity.kappa", 2.2)));
  const double low_var = activity_variance(low.window(25.0, 30.0));
  double high_min = INFINITY;
  for (double t = 0; t + 5.0 <= 120.0 + 1e-9; t += 5.0)
    high_min = std::min(high_min, activity_variance(high.window(t, t + 5.0)));
  return {low_var < 1e-6 && high_min > 1e-3,
          fmt("kappa 0.2 variance in [25,30) s %.3g; kappa 2.2 min 5 s window variance over 120 s %.3g", low_var,
              high_min)};
}

// ---- 4

Outcome zero_stationarity() {
  const char* names[] = {"hebb.json",        "rotation.json",  "crawl.json", "chain-kick.json",
                         "hexapod-m1.json",  "hexapod-m2.json", "wheel.json", "two-agent-wheel.json",
                         "rule-comparison-dep.json"};
  std::string failed;
  int checked = 0;
  for (const char* n : names) {
    json j = read_json(n);
    j["perturbations"] = json::array();
    j.erase("initial_weights");
    j.erase("weight_copy");
    j["plant"].erase("initial");
    j["plasticity"]["tau_h"] = nullptr;
    if (j["plasticity"]["rule"] != "Hebb") j["plasticity"]["rule"] = "DEP";
    Simulation sim(config(j));
    const VectorXd rest = sim.plant().read();
    sim.run();
    const RunLog& log = sim.log();
    bool ok = (log.y.array() == 0.0).all();
    for (Eigen::Index r = 0; r < log.x.rows() && ok; ++r)
      for (int a = 0; a < log.agents; ++a) {
        const auto& s = sim.agent(a);
        const auto xs = log.x.row(r).segment(a * s.controller.sensors(), s.controller.sensors());
        ok &= (xs.head(s.base_sensors).transpose().array() ==
               rest.segment(s.sensor_offset, s.base_sensors).array()).all();
        ok &= (xs.tail(xs.size() - s.base_sensors).array() == 0.0).all() || r >= s.delay.steps();
      }
    const bool zero_x = (rest.array() == 0.0).all();
    if (!ok) failed += std::string(" ") + n;
    checked += 1;
    if (!zero_x && std::string(n).find("wheel") == std::string::npos) failed += std::string(" ") + n + "(rest)";
  }
  return {failed.empty(), fmt("%d configs at least-biased rest: y identically 0, x identically the rest reading "
                              "(0 on linear and chain plants, crank position on wheels)%s%s",
                              checked, failed.empty() ? "" : "; failed:", failed.c_str())};
}

// ---- 5

Outcome rotation_self_consistency() {
  Simulation sim(config("rotation.json"));
  sim.run();
  const RunLog& log = sim.log();
  const MatrixXd x = log.window(40.0, 60.0);
  const MatrixXd xd = (x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1)) / log.dt;
  const auto& a = sim.agent(0);
  const RotationDefect d = rotation_consistency(xd, a.controller.C, a.M);
  const SpectrumSample s = spectrum(a.M, a.controller.C);
  const auto l = s.eigenvalues(0);
  const bool pair = std::abs(l.imag()) > 0.1 && std::abs(s.eigenvalues(1) - std::conj(l)) < 1e-12;
  return {d.defined && d.identity_defect < 0.1 && pair,
          fmt("identity defect %.4f over a %d-sample period; eigenvalues %.4f%+.4fi, %.4f%+.4fi",
              d.identity_defect, d.period, l.real(), l.imag(), s.eigenvalues(1).real(), s.eigenvalues(1).imag())};
}

// ---- 6

MatrixXd ap_columns(const MatrixXd& x) {
  MatrixXd out(x.rows(), hexapod::kLegs);
  for (int l = 0; l < hexapod::kLegs; ++l) out.col(l) = x.col(hexapod::ap(l));
  return out;
}

Outcome guided_anti_phase() {
  const RunLog log = run_experiment(config("hexapod-m1.json"));
  const PhaseMatrix p = phase_relations(ap_columns(log.window(80.0, 120.0)), log.dt);
  double worst = 0;
  bool defined = true;
  std::string pairs;
  for (auto [a, b] : {std::pair{0, 1}, {1, 2}, {3, 4}, {4, 5}}) {
    defined &= p.defined(a, b);
    const double dev = std::abs(wrap_angle(p.phase(a, b) - pi()));
    worst = std::max(worst, dev);
    pairs += fmt(" %d-%d:%.3f", a, b, p.phase(a, b));
  }
  return {defined && worst < 0.3,
          fmt("max |phase - pi| %.3f rad at %.2f Hz; phases%s", worst, p.frequency, pairs.c_str())};
}

// ---- 7

double mean_omega(const RunLog& log, double from, double to) {
  const int c = log.observable("omega");
  const Eigen::Index a = log.row_at(from), b = log.row_at(to);
  return log.observables.col(c).segment(a, b - a).mean();
}

Outcome wheel_inertia() {
  const auto grid = expand_grid(read_json("wheel-inertia-sweep.json"));
  double eps = 0, first = 0, last = 0, last_tail = 0;
  std::string rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ExperimentConfig c = config(grid[i]);
    const double T = c.duration;
    Simulation zero(c);
    zero.load(0, init_least_biased(zero.agent(0).controller.sensors(), zero.agent(0).controller.motors()), true);
    zero.run();
    eps = std::max(eps, std::abs(mean_omega(zero.log(), 0, T)));
    const RunLog log = run_experiment(c);
    const double m = mean_omega(log, 0, T);
    if (i == 0) first = m;
    last = m;
    last_tail = mean_omega(log, T - 20.0, T);
    rows += fmt(" %g:%.3g", c.wheel.J_w, m);
  }
  const RunLog flip = run_experiment(config("wheel.json"));
  const double before = mean_omega(flip, 40.0, 60.0), after = mean_omega(flip, 100.0, 120.0);
  const bool flipped = before * after < 0 && std::abs(before) > 10 * eps && std::abs(after) > 10 * eps;
  const bool pass = std::abs(first) < eps && std::abs(last) > 10 * eps && std::abs(last_tail) > 10 * eps && flipped;
  return {pass, fmt("eps %.3g; mean omega by J_w%s; largest J_w last 20 s %.3g; pulse flips %.3f -> %.3f", eps,
                    rows.c_str(), last_tail, before, after)};
}

// ---- 8

Outcome recall_fidelity() {
  ExperimentConfig c1 = config("hexapod-m1.json"), c2 = config("hexapod-m2.json");
  const RunLog r1 = run_experiment(c1), r2 = run_experiment(c2);
  // M1 settles early; the M2 controller keeps drifting, so only its last 20 s are sampled
  std::vector<MatrixXd> snaps;
  std::vector<int> source;
  for (const auto* w : r1.weights_for(0))
    if (w->time >= 60.0) snaps.push_back(w->C), source.push_back(0);
  for (const auto* w : r2.weights_for(0))
    if (w->time >= c2.duration - 20.0) snaps.push_back(w->C), source.push_back(1);
  const Clustering cl = cluster_weights(snaps, 2);
  int pure = 0;
  for (std::size_t i = 0; i < snaps.size(); ++i) pure += cl.assignment[i] == cl.assignment.front() ? source[i] == 0 : source[i] == 1;
  const bool separated = pure == static_cast<int>(snaps.size());
  auto center = [&](int src) {
    ControllerState s = init_least_biased(snaps[0].cols(), snaps[0].rows());
    for (std::size_t i = 0; i < snaps.size(); ++i)
      if (source[i] == src) {
        s.C = cl.centers[cl.assignment[i]];
        break;
      }
    return s;
  };
  const PhaseMatrix p1 = phase_relations(ap_columns(r1.window(80.0, 120.0)), r1.dt);
  const PhaseMatrix p2 = phase_relations(ap_columns(r2.window(c2.duration - 40.0, c2.duration)), r2.dt);

  const RunLog f1 = schedule_recall(c1, {{0.0, 0, center(0)}});
  const RunLog f2 = schedule_recall(c1, {{0.0, 0, center(1)}});
  const double d1 = phase_distance(phase_relations(ap_columns(f1.window(80.0, 120.0)), f1.dt), p1);
  const double d2 = phase_distance(phase_relations(ap_columns(f2.window(80.0, 120.0)), f2.dt), p2);

  const RunLog seq = schedule_recall(c1, {{0.0, 0, center(0)}, {60.0, 0, center(1)}});
  const double sa = phase_distance(phase_relations(ap_columns(seq.window(20.0, 60.0)), seq.dt), p1);
  const double sb = phase_distance(phase_relations(ap_columns(seq.window(80.0, 120.0)), seq.dt), p2);
  const double regimes = phase_distance(p1, p2);
  const bool pass = separated && d1 < 0.3 && d2 < 0.3 && sa < 0.3 && sb < 0.3 && regimes > 0.3;
  return {pass, fmt("clusters %s; frozen recall deviation M1 %.3f M2 %.3f rad; sequence segments %.3f then %.3f "
                    "rad; regimes differ by %.3f rad",
                    separated ? "separate the sources" : "mix the sources", d1, d2, sa, sb, regimes)};
}

// ---- 9

Outcome numerical_hygiene() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  int failures = 0;
  std::string what;
  auto fail = [&](const std::string& w) {
    ++failures;
    what += " " + w;
  };

  // normalization caps
  for (int trial = 0; trial < 500; ++trial) {
    const double scale = std::pow(10.0, trial % 13 - 6);
    const MatrixXd C = scale * MatrixXd::NullaryExpr(5, 7, [&] { return g(rng); });
    const double kappa = 0.1 + 3.0 * (trial % 17) / 17.0;
    if (!(normalize_global(C, kappa, 1e-12).norm() < kappa)) fail("global cap");
    const MatrixXd I = normalize_individual(C, kappa, 1e-12);
    for (Eigen::Index i = 0; i < I.rows(); ++i)
      if (!(I.row(i).norm() < kappa)) fail("row cap");
  }

  // derivative estimator: error of a backward difference is at most dt/2 max|f''|
  {
    const double dt = 0.02, w = 3.0;
    DerivativeBuffer buf(1);
    double worst = 0;
    for (int s = 0; s < 2000; ++s) {
      const double t = s * dt;
      const VectorXd v = VectorXd::Constant(1, std::sin(w * t));
      const double est = estimate_derivative(buf, v, dt)(0);
      if (s > 0) worst = std::max(worst, std::abs(est - w * std::cos(w * t)));
    }
    if (!(worst <= dt / 2 * w * w + 1e-12)) fail("derivative bound");
  }

  // extrinsic closure and conjugate closure
  for (int trial = 0; trial < 200; ++trial) {
    const MatrixXd M = MatrixXd::NullaryExpr(6, 6, [&] { return g(rng); });
    const VectorXd xd = VectorXd::NullaryExpr(6, [&] { return g(rng); });
    const VectorXd yd = VectorXd::NullaryExpr(6, [&] { return g(rng); });
    const VectorXd yt = apply_model(M, xd);
    const VectorXd back = yd + extrinsic_signal(yt, yd);
    if ((back - yt).norm() > 4 * std::numeric_limits<double>::epsilon() * (yt.norm() + yd.norm())) fail("closure");
    const SpectrumSample s = spectrum(M, MatrixXd::NullaryExpr(6, 6, [&] { return g(rng); }));
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
      if (s.eigenvalues(i).imag() == 0.0) continue;
      bool found = false;
      for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) found |= s.eigenvalues(k) == std::conj(s.eigenvalues(i));
      if (!found) fail("conjugate pair");
    }
  }

  // replay determinism and log integrity
  {
    json j = read_json("hexapod-m1.json");
    j["duration"] = 20.0;
    j["snapshot_times"] = json::array();
    const ExperimentConfig c = config(j);
    const fs::path root = fs::temp_directory_path() / "dep-acceptance-replay";
    fs::remove_all(root);
    write_runlog(run_experiment(c), c, (root / "a").string());
    const RunLog again = run_experiment(c);
    write_runlog(again, c, (root / "b").string());
    for (const auto& e : fs::directory_iterator(root / "a")) {
      auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
      };
      if (slurp(e.path()) != slurp(root / "b" / e.path().filename())) fail("replay " + e.path().filename().string());
    }
    fs::remove_all(root);
    for (const auto& w : again.weights)
      for (Eigen::Index i = 0; i < w.C.rows(); ++i)
        if (!(w.C.row(i).norm() < c.plasticity.kappa)) fail("log integrity");
  }
  return {failures == 0, failures == 0 ? "caps, derivative bound, closure, conjugate pairs, replay and log integrity hold"
                                       : fmt("%d failures:%s", failures, what.c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit;  // wall clock seconds, 0 for none
    std::function<Outcome()> check;
  };
  const Criterion criteria[] = {
      {1, "Hebb state fixed point", 5.0, hebb_fixed_point},
      {2, "DHL rank collapse vs DEP richness", 30.0, rule_comparison},
      {3, "kappa threshold", 0.0, kappa_threshold},
      {4, "zero initialization stationarity", 0.0, zero_stationarity},
      {5, "rotation self-consistency", 0.0, rotation_self_consistency},
      {6, "guided anti-phase", 0.0, guided_anti_phase},
      {7, "wheel inertia dependence", 0.0, wheel_inertia},
      {8, "recall fidelity", 0.0, recall_fidelity},
      {9, "numerical hygiene", 0.0, numerical_hygiene},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit > 0) {
      timing += fmt(" (limit %.0f s)", c.limit);
      if (secs >= c.limit) o.pass = false;
    }
    failed += !o.pass;
    std::printf("[%s] %d %s: %s; %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed ? 1 : 0;
}
