#include <fnmatch.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dep/harness.hpp"

using namespace dep;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> expand_pattern(const std::string& pattern) {
  if (pattern.find_first_of("*?[") == std::string::npos) return {pattern};
  const fs::path p(pattern);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  std::vector<std::string> out;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (fnmatch(p.filename().c_str(), e.path().filename().c_str(), 0) == 0) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json complex_list(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

json matrix_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(r);
  }
  return rows;
}

std::vector<MatrixXd> weights_in(const RunLog& log, int agent, double from, double to) {
  std::vector<MatrixXd> out;
  for (const auto* w : log.weights_for(agent))
    if (w->time >= from && w->time < to) out.push_back(w->C);
  return out;
}

int cmd_run(const std::string& path, const std::string& out) {
  const ExperimentConfig cfg = load_config(path);
  const RunLog log = run_experiment(cfg);
  const std::string dir = out.empty() ? resolve_output_dir(cfg) : out;
  write_runlog(log, cfg, dir);
  json s = summarize(log);
  s["output"] = dir;
  std::cout << s.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::vector<std::string>& patterns, const std::string& csv) {
  std::vector<ExperimentConfig> configs;
  for (const auto& pat : patterns) {
    const auto files = expand_pattern(pat);
    if (files.empty()) throw ConfigError("no config matches " + pat);
    for (const auto& f : files)
      for (const auto& j : expand_grid(read_json(f))) configs.push_back(parse_config(j, fs::path(f).parent_path().string()));
  }
  const auto rows = sweep(configs);
  write_sweep_csv(rows, csv);
  int failed = 0;
  for (const auto& r : rows) {
    if (r.ok) std::cout << r.name << " " << r.metrics.dump() << "\n";
    else std::cout << r.name << " FAILED " << r.error << "\n", ++failed;
  }
  std::cout << "wrote " << csv << "\n";
  return failed ? 2 : 0;
}

struct AnalyzeOptions {
  bool spectrum = false, phase = false, steps = false;
  int cluster = 0;
  int agent = 0;
  double from = 0, to = 1e300;
  std::vector<int> channels;
};

int cmd_analyze(const std::string& dir, const AnalyzeOptions& o) {
  const RunLog log = read_runlog(dir);
  const double end = log.x.rows() * log.dt;
  const double to = std::min(o.to, end);
  json out;
  out["name"] = log.name;
  if (o.spectrum) {
    json rows = json::array();
    for (const auto* w : log.weights_for(o.agent))
      if (w->time >= o.from && w->time < to && w->spectrum.eigenvalues.size())
        rows.push_back({{"t", w->time}, {"nonzero", nonzero_count(w->spectrum)},
                        {"eigenvalues", complex_list(w->spectrum.eigenvalues)}});
    out["spectrum"] = rows;
  }
  if (o.phase) {
    const MatrixXd x = log.window(o.from, to);
    MatrixXd sel(x.rows(), o.channels.empty() ? x.cols() : static_cast<Eigen::Index>(o.channels.size()));
    for (Eigen::Index c = 0; c < sel.cols(); ++c) {
      const int ch = o.channels.empty() ? static_cast<int>(c) : o.channels[c];
      if (ch < 0 || ch >= x.cols()) throw ConfigError("channel " + std::to_string(ch) + " out of range");
      sel.col(c) = x.col(ch);
    }
    const PhaseMatrix p = phase_relations(sel, log.dt);
    json defined = json::array();
    for (Eigen::Index i = 0; i < p.defined.rows(); ++i) {
      json r = json::array();
      for (Eigen::Index k = 0; k < p.defined.cols(); ++k) r.push_back(bool(p.defined(i, k)));
      defined.push_back(r);
    }
    out["phase"] = {{"frequency", p.frequency}, {"phase", matrix_json(p.phase)}, {"defined", defined}};
  }
  if (o.steps) {
    if (!log.contacts.cols()) throw ConfigError("run log has no contact channels");
    const auto a = log.row_at(o.from), b = log.row_at(to);
    const auto pattern = extract_step_pattern(log.contacts.middleRows(a, b - a), log.dt);
    json legs = json::array();
    for (const auto& leg : pattern.down) {
      json iv = json::array();
      for (const auto& i : leg) iv.push_back({i.start + a * log.dt, i.end + a * log.dt});
      legs.push_back(iv);
    }
    out["steps"] = {{"gait", pattern.gait}, {"down", legs}};
  }
  if (o.cluster > 0) {
    const auto snaps = weights_in(log, o.agent, o.from, to);
    const Clustering c = cluster_weights(snaps, o.cluster);
    const fs::path cdir = fs::path(dir) / "clusters";
    fs::create_directories(cdir);
    json files = json::array();
    for (std::size_t i = 0; i < c.centers.size(); ++i) {
      ControllerState s = init_least_biased(c.centers[i].cols(), c.centers[i].rows());
      s.C = c.centers[i];
      const fs::path f = cdir / ("center_" + std::to_string(i) + ".json");
      std::ofstream(f) << snapshot_to_json(s) << "\n";
      files.push_back(f.string());
    }
    out["cluster"] = {{"k", o.cluster}, {"assignment", c.assignment}, {"centers", files}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// sequence: {"config": path?, "cluster": {"k", "from", "to", "agent"}?, "output": dir?,
//            "switches": [{"time", "agent", "snapshot": index | "cluster:i" | path}]}
int cmd_recall(const std::string& dir, const std::string& seq_path) {
  const json seq = read_json(seq_path);
  const fs::path base = fs::path(seq_path).parent_path();
  const RunLog log = read_runlog(dir);
  ExperimentConfig cfg = seq.contains("config")
                             ? load_config((base / seq["config"].get<std::string>()).string())
                             : parse_config(read_json((fs::path(dir) / "config.json").string()), dir);
  cfg.name = log.name + "-recall";
  cfg.recall.clear();
  cfg.copy_source.reset();

  std::optional<Clustering> clusters;
  if (seq.contains("cluster")) {
    const json& c = seq["cluster"];
    clusters = cluster_weights(weights_in(log, c.value("agent", 0), c.value("from", 0.0), c.value("to", 1e300)),
                               c.at("k").get<int>());
  }
  std::vector<RecallSwitch> switches;
  for (const auto& s : seq.at("switches")) {
    RecallSwitch r;
    r.time = s.at("time").get<double>();
    r.agent = s.value("agent", 0);
    const json& id = s.at("snapshot");
    if (id.is_number_integer()) {
      const int i = id.get<int>();
      if (i < 0 || i >= static_cast<int>(log.snapshots.size()))
        throw ConfigError("unknown snapshot " + std::to_string(i));
      r.weights = log.snapshots[i].agents.at(r.agent);
    } else if (const auto name = id.get<std::string>(); name.rfind("cluster:", 0) == 0) {
      const int i = std::stoi(name.substr(8));
      if (!clusters || i < 0 || i >= static_cast<int>(clusters->centers.size()))
        throw ConfigError("unknown snapshot " + name);
      r.weights = init_least_biased(clusters->centers[i].cols(), clusters->centers[i].rows());
      r.weights.C = clusters->centers[i];
    } else {
      std::ifstream in(base / name);
      if (!in) throw ConfigError("unknown snapshot " + name);
      r.weights = snapshot_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    switches.push_back(std::move(r));
  }
  cfg.recall = switches;
  cfg.validate();
  const RunLog out = run_experiment(cfg);
  const std::string odir = seq.value("output", dir + "-recall");
  write_runlog(out, cfg, odir);
  json s = summarize(out);
  s["output"] = odir;
  std::cout << s.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deplab: closed-loop plasticity experiments"};
  app.require_subcommand(1);

  std::string config, out;
  auto* run = app.add_subcommand("run", "run one experiment and write its run log");
  run->add_option("config", config, "experiment config")->required();
  run->add_option("--out", out, "output directory (default from config or " + std::string(kOutputDirEnv) + ")");

  std::vector<std::string> patterns;
  std::string csv = "runs/sweep.csv";
  auto* sw = app.add_subcommand("sweep", "run configs and their grids, collect metrics in one CSV");
  sw->add_option("configs", patterns, "config files or glob patterns")->required();
  sw->add_option("--csv", csv, "summary table path");

  std::string runlog;
  AnalyzeOptions ao;
  auto* an = app.add_subcommand("analyze", "analyses on a written run log");
  an->add_option("runlog", runlog, "run log directory")->required();
  an->add_flag("--spectrum", ao.spectrum, "eigenvalues of R at each logged sample");
  an->add_flag("--phase", ao.phase, "pairwise phase matrix");
  an->add_flag("--steps", ao.steps, "step pattern and gait label from contacts");
  an->add_option("--cluster", ao.cluster, "k-means on logged weights");
  an->add_option("--agent", ao.agent, "agent index");
  an->add_option("--from", ao.from, "window start (s)");
  an->add_option("--to", ao.to, "window end (s)");
  an->add_option("--channels", ao.channels, "sensor columns for --phase");

  std::string sequence;
  auto* rc = app.add_subcommand("recall", "replay frozen weights from a run log");
  rc->add_option("runlog", runlog, "run log directory")->required();
  rc->add_option("sequence", sequence, "recall sequence JSON")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out);
    if (*sw) return cmd_sweep(patterns, csv);
    if (*an) {
      if (!ao.spectrum && !ao.phase && !ao.steps && ao.cluster <= 0) ao.spectrum = true;
      return cmd_analyze(runlog, ao);
    }
    if (*rc) return cmd_recall(runlog, sequence);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
