#include "dep/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace dep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

VectorXd vec_from(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd mat_from(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(to_json(VectorXd(M.row(i).transpose())));
  return rows;
}

int step_of(double time, double dt) { return static_cast<int>(std::lround(time / dt)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- config

int ExperimentConfig::steps() const { return step_of(duration, plasticity.dt); }

void ExperimentConfig::validate() const {
  try {
    plasticity.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plasticity: ") + e.what());
  }
  const double dt = plasticity.dt;
  if (!(duration > 0)) throw ConfigError("duration must be positive");
  if (!(log_interval >= dt)) throw ConfigError("log_interval must be at least dt");
  const double plant_dt = plant_type == "linear" ? linear.dt : plant_type == "chain" ? chain.dt : wheel.dt;
  if (plant_dt != dt) throw ConfigError("plant dt differs from plasticity dt");
  auto check_time = [&](double t, const std::string& what) {
    if (!(t >= 0)) throw ConfigError(what + " scheduled in the past");
    if (t > duration) throw ConfigError(what + " scheduled after the end of the run");
  };
  for (const auto& p : perturbations) {
    check_time(p.time, "perturbation");
    if (!std::isfinite(p.magnitude)) throw ConfigError("perturbation magnitude must be finite");
  }
  for (double t : snapshot_times) check_time(t, "snapshot");
  for (const auto& r : recall) check_time(r.time, "recall switch");
  if (copy_source) {
    check_time(copy_time, "weight copy");
    if (copy_source->plasticity.dt != dt) throw ConfigError("weight copy source uses a different dt");
  }
  if (model != "identity" && model != "hexapod-m1" && model != "hexapod-m2" && model != "entries" &&
      model != "learned")
    throw ConfigError("unknown model '" + model + "'");
  if (delayed) {
    try {
      delayed->steps(dt);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("delayed sensors: ") + e.what());
    }
  }
}

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
  ExperimentConfig c;
  c.source = j;
  try {
    c.name = j.value("name", c.name);
    c.duration = j.value("duration", c.duration);
    c.log_interval = j.value("log_interval", c.log_interval);
    c.output = j.value("output", std::string());

    const json& pl = j.at("plasticity");
    c.plasticity.rule = rule_from_string(pl.value("rule", std::string("DEP")));
    c.plasticity.tau = pl.value("tau", c.plasticity.tau);
    if (pl.contains("tau_h") && !pl["tau_h"].is_null()) c.plasticity.tau_h = pl["tau_h"].get<double>();
    c.plasticity.kappa = pl.value("kappa", c.plasticity.kappa);
    c.plasticity.rho = pl.value("rho", c.plasticity.rho);
    c.plasticity.normalization = normalization_from_string(pl.value("normalization", std::string("Global")));
    c.plasticity.dt = pl.value("dt", c.plasticity.dt);
    const double dt = c.plasticity.dt;

    const json& p = j.at("plant");
    c.plant_type = p.at("type").get<std::string>();
    if (c.plant_type == "linear") {
      c.linear.n = p.value("n", c.linear.n);
      c.linear.beta = p.value("beta", c.linear.beta);
      c.linear.theta = p.value("theta", c.linear.theta);
      c.linear.dt = p.value("dt", dt);
      if (p.contains("initial")) c.linear.initial = vec_from(p["initial"]);
    } else if (c.plant_type == "chain") {
      c.chain.n = p.value("n", c.chain.n);
      c.chain.J = p.value("J", c.chain.J);
      c.chain.k = p.value("k", c.chain.k);
      c.chain.c = p.value("c", c.chain.c);
      c.chain.dt = p.value("dt", dt);
      if (p.contains("coupling")) {
        if (p["coupling"].is_number())
          c.chain.coupling = ChainParams::nearest_neighbor(c.chain.n, p["coupling"].get<double>());
        else
          c.chain.coupling = mat_from(p["coupling"]);
      }
      c.chain.contact_joints = p.value("contact_joints", std::vector<int>{});
      c.chain.contact_threshold = p.value("contact_threshold", c.chain.contact_threshold);
    } else if (c.plant_type == "wheel") {
      c.wheel.agents = p.value("agents", c.wheel.agents);
      c.wheel.J_w = p.value("J_w", c.wheel.J_w);
      c.wheel.J_a = p.value("J_a", c.wheel.J_a);
      c.wheel.k = p.value("k", c.wheel.k);
      c.wheel.c = p.value("c", c.wheel.c);
      c.wheel.b = p.value("b", c.wheel.b);
      c.wheel.friction = p.value("friction", c.wheel.friction);
      c.wheel.radius = p.value("radius", c.wheel.radius);
      c.wheel.dt = p.value("dt", dt);
    } else {
      throw ConfigError("unknown plant type '" + c.plant_type + "'");
    }

    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.is_string()) {
        c.model = m.get<std::string>();
      } else if (m.contains("entries")) {
        c.model = "entries";
        for (const auto& e : m["entries"])
          c.model_entries.push_back({e.at("row").get<int>(), e.at("col").get<int>(), e.at("sign").get<int>()});
      } else if (m.contains("learned")) {
        c.model = "learned";
        c.babble_duration = m["learned"].value("duration", c.babble_duration);
      } else {
        throw ConfigError("model must be a preset name, {entries: [...]} or {learned: {...}}");
      }
    }

    if (j.contains("delayed") && !j["delayed"].is_null()) {
      const json& d = j["delayed"];
      DelayedSensorConfig dc;
      dc.delay = d.at("delay").get<double>();
      if (d.value("preset", std::string()) == "hexapod")
        dc.indices = hexapod::delayed_sources();
      else
        dc.indices = d.at("indices").get<std::vector<int>>();
      c.delayed = dc;
    }

    if (j.contains("initial_weights") && !j["initial_weights"].is_null()) {
      const json& w = j["initial_weights"];
      if (w.contains("identity")) c.initial_identity = w["identity"].get<double>();
      if (w.contains("C")) c.initial_weights = mat_from(w["C"]);
    }

    for (const auto& e : j.value("perturbations", json::array())) {
      Perturbation q;
      q.kind = perturbation_kind_from_string(e.at("kind").get<std::string>());
      q.target = e.value("target", 0);
      q.magnitude = e.value("magnitude", 0.0);
      q.duration = e.value("duration", 0.0);
      q.time = e.value("time", 0.0);
      c.perturbations.push_back(q);
    }
    c.snapshot_times = j.value("snapshot_times", std::vector<double>{});

    for (const auto& r : j.value("recall", json::array())) {
      RecallSwitch s;
      s.time = r.value("time", 0.0);
      s.agent = r.value("agent", 0);
      const json& snap = r.at("snapshot");
      if (snap.is_string()) {
        fs::path path = snap.get<std::string>();
        if (path.is_relative()) path = fs::path(base_dir) / path;
        s.weights = snapshot_from_json(read_file(path.string()));
      } else {
        s.weights = snapshot_from_json(snap.dump());
      }
      c.recall.push_back(s);
    }

    if (j.contains("weight_copy") && !j["weight_copy"].is_null()) {
      const json& wc = j["weight_copy"];
      c.copy_time = wc.at("time").get<double>();
      const json& src = wc.at("source");
      if (src.is_string()) {
        fs::path path = src.get<std::string>();
        if (path.is_relative()) path = fs::path(base_dir) / path;
        c.copy_source = std::make_shared<ExperimentConfig>(load_config(path.string()));
      } else {
        c.copy_source = std::make_shared<ExperimentConfig>(parse_config(src, base_dir));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j, fs::path(path).parent_path().string());
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["duration"] = c.duration;
  j["log_interval"] = c.log_interval;
  if (!c.output.empty()) j["output"] = c.output;
  const auto& pp = c.plasticity;
  j["plasticity"] = {{"rule", to_string(pp.rule)},
                     {"tau", pp.tau},
                     {"tau_h", pp.tau_h ? json(*pp.tau_h) : json(nullptr)},
                     {"kappa", pp.kappa},
                     {"rho", pp.rho},
                     {"normalization", to_string(pp.normalization)},
                     {"dt", pp.dt}};
  if (c.plant_type == "linear") {
    j["plant"] = {{"type", "linear"}, {"n", c.linear.n}, {"beta", c.linear.beta},
                  {"theta", c.linear.theta}, {"dt", c.linear.dt}};
    if (c.linear.initial.size()) j["plant"]["initial"] = to_json(c.linear.initial);
  } else if (c.plant_type == "chain") {
    j["plant"] = {{"type", "chain"},
                  {"n", c.chain.n},
                  {"J", c.chain.J},
                  {"k", c.chain.k},
                  {"c", c.chain.c},
                  {"dt", c.chain.dt},
                  {"contact_joints", c.chain.contact_joints},
                  {"contact_threshold", c.chain.contact_threshold}};
    if (c.chain.coupling.size()) j["plant"]["coupling"] = to_json(c.chain.coupling);
  } else {
    const auto& w = c.wheel;
    j["plant"] = {{"type", "wheel"}, {"agents", w.agents}, {"J_w", w.J_w}, {"J_a", w.J_a},
                  {"k", w.k},        {"c", w.c},           {"b", w.b},     {"friction", w.friction},
                  {"radius", w.radius}, {"dt", w.dt}};
  }
  if (c.model == "entries") {
    json e = json::array();
    for (const auto& g : c.model_entries) e.push_back({{"row", g.row}, {"col", g.col}, {"sign", g.sign}});
    j["model"] = {{"entries", e}};
  } else if (c.model == "learned") {
    j["model"] = {{"learned", {{"duration", c.babble_duration}}}};
  } else {
    j["model"] = c.model;
  }
  if (c.delayed) j["delayed"] = {{"indices", c.delayed->indices}, {"delay", c.delayed->delay}};
  if (c.initial_weights) j["initial_weights"] = {{"C", to_json(*c.initial_weights)}};
  else if (c.initial_identity) j["initial_weights"] = {{"identity", *c.initial_identity}};
  json perts = json::array();
  for (const auto& p : c.perturbations)
    perts.push_back({{"kind", to_string(p.kind)}, {"target", p.target}, {"magnitude", p.magnitude},
                     {"duration", p.duration}, {"time", p.time}});
  j["perturbations"] = perts;
  j["snapshot_times"] = c.snapshot_times;
  json rec = json::array();
  for (const auto& r : c.recall)
    rec.push_back({{"time", r.time}, {"agent", r.agent}, {"snapshot", json::parse(snapshot_to_json(r.weights))}});
  j["recall"] = rec;
  if (c.copy_source) j["weight_copy"] = {{"time", c.copy_time}, {"source", config_to_json(*c.copy_source)}};
  return j;
}

std::unique_ptr<Plant> make_plant(const ExperimentConfig& cfg) {
  try {
    if (cfg.plant_type == "linear") return std::make_unique<LinearDelayPlant>(cfg.linear);
    if (cfg.plant_type == "chain") return std::make_unique<JointChain>(cfg.chain);
    if (cfg.plant_type == "wheel") return std::make_unique<CrankWheel>(cfg.wheel);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }
  throw ConfigError("unknown plant type '" + cfg.plant_type + "'");
}

OfflineModel learn_model_by_babbling(const Plant& plant, double duration, double amplitude) {
  auto p = plant.clone();
  const double dt = p->dt();
  const int m = p->motors();
  const int steps = step_of(duration, dt);
  std::vector<std::pair<VectorXd, VectorXd>> samples;
  VectorXd y_prev = VectorXd::Zero(m), y(m), x = p->read();
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    for (int i = 0; i < m; ++i) y(i) = amplitude * std::sin(2.0 * std::numbers::pi * 0.05 * (1.0 + 0.37 * i) * t + 0.5 * i);
    const VectorXd x_next = p->step(y);
    if (s > 0) samples.emplace_back((x_next - x) / dt, (y - y_prev) / dt);
    x = x_next;
    y_prev = y;
  }
  return learn_model_offline(samples);
}

// ---- run log

MatrixXd RunLog::window(double from, double to) const {
  const Eigen::Index a = row_at(from), b = std::min<Eigen::Index>(row_at(to), x.rows());
  return x.middleRows(a, std::max<Eigen::Index>(0, b - a));
}

Eigen::Index RunLog::row_at(double time) const {
  return std::clamp<Eigen::Index>(std::lround(time / dt), 0, x.rows());
}

std::vector<const WeightSample*> RunLog::weights_for(int agent) const {
  std::vector<const WeightSample*> out;
  for (const auto& w : weights)
    if (w.agent == agent) out.push_back(&w);
  return out;
}

int RunLog::observable(const std::string& n) const {
  for (std::size_t i = 0; i < observable_names.size(); ++i)
    if (observable_names[i] == n) return static_cast<int>(i);
  return -1;
}

// ---- simulation

Simulation::Simulation(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  plant_ = make_plant(cfg_);
  const double dt = cfg_.plasticity.dt;
  const int A = plant_->agents();
  if (plant_->sensors() % A || plant_->motors() % A) throw ConfigError("plant channels do not split across agents");
  const int base = plant_->sensors() / A, m = plant_->motors() / A;

  std::optional<OfflineModel> learned;
  if (cfg_.model == "learned") {
    if (A != 1 || cfg_.delayed) throw ConfigError("learned models need a single agent without delayed channels");
    learned = learn_model_by_babbling(*plant_, cfg_.babble_duration);
  }

  for (int a = 0; a < A; ++a) {
    AgentState s;
    s.params = cfg_.plasticity;
    s.base_sensors = base;
    s.sensor_offset = a * base;
    s.motor_offset = a * m;
    try {
      s.delay = DelayLine(cfg_.delayed.value_or(DelayedSensorConfig{}), base, dt);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("delayed sensors: ") + e.what());
    }
    const int n = base + s.delay.extra();
    s.controller = init_least_biased(n, m);
    try {
      if (learned) s.M = learned->M;
      else if (cfg_.model == "entries") s.M = build_guided_model(cfg_.model_entries, m, n);
      else s.M = model_preset(cfg_.model, m, n);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    s.raw = MatrixXd::Zero(m, n);
    if (cfg_.initial_weights) {
      if (cfg_.initial_weights->rows() != m || cfg_.initial_weights->cols() != n)
        throw ConfigError("initial weights have the wrong shape");
      s.raw = *cfg_.initial_weights;
    } else if (cfg_.initial_identity) {
      s.raw = *cfg_.initial_identity * MatrixXd::Identity(m, n);
    }
    if (cfg_.initial_weights || cfg_.initial_identity) s.controller.C = normalize(s.raw, s.params);
    s.x_buffer = DerivativeBuffer(n);
    s.x = s.x_prev = s.x_dot = s.x_dot_prev = VectorXd::Zero(n);
    s.y_prev = s.y_prev2 = s.y_tilde_dot = s.delta = VectorXd::Zero(m);
    agents_.push_back(std::move(s));
  }

  if (cfg_.copy_source) source_ = std::make_unique<Simulation>(*cfg_.copy_source);

  log_every_ = std::max(1, step_of(cfg_.log_interval, dt));
  const int steps = cfg_.steps();
  int nx = 0, ny = 0;
  for (const auto& s : agents_) {
    nx += s.controller.sensors();
    ny += s.controller.motors();
  }
  log_.name = cfg_.name;
  log_.dt = dt;
  log_.agents = A;
  log_.t.reserve(steps);
  log_.x.setZero(steps, nx);
  log_.y.setZero(steps, ny);
  log_.y_tilde_dot_norm.setZero(steps);
  log_.delta_norm.setZero(steps);
  log_.observable_names = plant_->observable_names();
  log_.observables.setZero(steps, static_cast<Eigen::Index>(log_.observable_names.size()));
  log_.contacts.setConstant(steps, static_cast<Eigen::Index>(plant_->contacts().size()), false);
  for (const auto& s : agents_) log_.models.push_back(s.M);
}

void Simulation::event(const std::string& kind, const std::string& detail) {
  log_.events.push_back({time(), step_, kind, detail});
}

void Simulation::copy_weights_from(const Simulation& other) {
  if (other.agents() != agents()) throw ConfigError("weight copy between different agent counts");
  for (int a = 0; a < agents(); ++a) {
    auto& s = agents_[a];
    const auto& o = other.agents_[a];
    if (o.raw.rows() != s.raw.rows() || o.raw.cols() != s.raw.cols())
      throw ConfigError("weight copy between different loop shapes");
    s.raw = o.raw;
    s.controller.C = normalize(s.raw, s.params);
    s.controller.h = o.controller.h;
  }
}

void Simulation::load(int agent, const ControllerState& weights, bool frozen) {
  auto& s = agents_.at(agent);
  s.controller = load_weights(s.controller, weights.C, weights.h, frozen);
  s.raw = weights.C;
}

void Simulation::apply_events() {
  const double dt = cfg_.plasticity.dt;
  if (source_) {
    if (step_ == step_of(cfg_.copy_time, dt)) {
      copy_weights_from(*source_);
      source_.reset();
      event("weight_copy", "source=" + cfg_.copy_source->name);
    } else {
      source_->step();
    }
  }
  for (const auto& p : cfg_.perturbations)
    if (step_ == step_of(p.time, dt)) {
      plant_->apply_perturbation(p);
      std::ostringstream d;
      d << to_string(p.kind) << " target=" << p.target << " magnitude=" << p.magnitude
        << " duration=" << p.duration;
      event("perturbation", d.str());
    }
  for (const auto& r : cfg_.recall)
    if (step_ == step_of(r.time, dt)) {
      if (r.agent < 0 || r.agent >= agents()) throw ConfigError("recall names an unknown agent");
      load(r.agent, r.weights, true);
      event("recall", "agent=" + std::to_string(r.agent));
    }
}

void Simulation::record_weights() {
  for (int a = 0; a < agents(); ++a) {
    const auto& s = agents_[a];
    WeightSample w;
    w.time = time();
    w.agent = a;
    w.C = s.controller.C;
    w.h = s.controller.h;
    if (s.M.rows() <= s.M.cols()) w.spectrum = spectrum(s.M, s.controller.C, w.time);
    log_.weights.push_back(std::move(w));
  }
}

void Simulation::step() {
  if (step_ >= cfg_.steps()) return;
  apply_events();
  const double dt = cfg_.plasticity.dt;
  const VectorXd base = plant_->read();
  VectorXd y_all(plant_->motors());
  int xcol = 0;
  const Eigen::Index row = step_;
  for (auto& s : agents_) {
    s.x = s.delay.extend(base.segment(s.sensor_offset, s.base_sensors));
    s.x_dot = s.x_buffer.update(s.x, dt);
    const VectorXd y_dot = (s.y_prev - s.y_prev2) / dt;
    s.y_tilde_dot = apply_model(s.M, s.x_dot);
    s.delta = extrinsic_signal(s.y_tilde_dot, y_dot);
    if (!s.controller.frozen) {
      switch (s.params.rule) {
        case Rule::DEP: s.raw = dep_update(s.raw, s.y_tilde_dot, s.x_dot_prev, s.params); break;
        case Rule::DHL: s.raw = dhl_update(s.raw, y_dot, s.x_dot_prev, s.params); break;
        case Rule::Hebb: s.raw = hebb_update(s.raw, s.y_prev, s.x_prev, s.params); break;
      }
      s.controller.C = normalize(s.raw, s.params);
      s.controller.h = threshold_update(s.controller.h, s.y_prev, s.params);
    }
    const VectorXd y = step_controller(s.controller, s.x);
    if (!all_finite(s.controller) || !y.allFinite() || !s.raw.allFinite())
      throw NumericError(step_, "non-finite controller state");
    y_all.segment(s.motor_offset, y.size()) = y;

    log_.x.row(row).segment(xcol, s.x.size()) = s.x.transpose();
    xcol += static_cast<int>(s.x.size());
  }
  log_.t.push_back(time());
  log_.y.row(row) = y_all.transpose();
  {
    double a = 0, b = 0;
    for (const auto& s : agents_) {
      a += s.y_tilde_dot.squaredNorm();
      b += s.delta.squaredNorm();
    }
    log_.y_tilde_dot_norm(row) = std::sqrt(a);
    log_.delta_norm(row) = std::sqrt(b);
  }
  if (log_.observables.cols()) log_.observables.row(row) = plant_->observables().transpose();
  const auto contacts = plant_->contacts();
  for (std::size_t c = 0; c < contacts.size(); ++c) log_.contacts(row, c) = contacts[c];
  if (step_ % log_every_ == 0) record_weights();
  for (double ts : cfg_.snapshot_times)
    if (step_ == step_of(ts, dt)) {
      Snapshot snap{time(), {}};
      for (const auto& s : agents_) snap.agents.push_back(s.controller);
      log_.snapshots.push_back(std::move(snap));
      event("snapshot", "index=" + std::to_string(log_.snapshots.size() - 1));
    }

  plant_->step(y_all);
  if (!plant_->read().allFinite()) throw NumericError(step_, "non-finite plant state");

  for (auto& s : agents_) {
    s.x_prev = s.x;
    s.x_dot_prev = s.x_dot;
    s.y_prev2 = s.y_prev;
    s.y_prev = y_all.segment(s.motor_offset, s.y_prev.size());
  }
  ++step_;
}

void Simulation::run() {
  while (step_ < cfg_.steps()) step();
}

RunLog run_experiment(const ExperimentConfig& cfg) {
  Simulation sim(cfg);
  sim.run();
  return sim.take_log();
}

RunLog schedule_recall(const ExperimentConfig& cfg, const std::vector<RecallSwitch>& sequence) {
  ExperimentConfig c = cfg;
  c.recall = sequence;
  return run_experiment(c);
}

// ---- output

json summarize(const RunLog& log) {
  json j;
  j["schema"] = kRunLogSchema;
  j["name"] = log.name;
  j["dt"] = log.dt;
  j["steps"] = log.x.rows();
  j["agents"] = log.agents;
  j["duration"] = log.x.rows() * log.dt;
  json m;
  const double tail = std::min(10.0, log.x.rows() * log.dt);
  m["activity_variance"] = activity_variance(log.window(log.x.rows() * log.dt - tail, log.x.rows() * log.dt));
  const int om = log.observable("omega");
  if (om >= 0 && log.observables.rows()) m["mean_omega"] = log.observables.col(om).mean();
  json counts = json::array(), norms = json::array();
  for (int a = 0; a < log.agents; ++a) {
    auto ws = log.weights_for(a);
    if (ws.empty()) continue;
    counts.push_back(ws.back()->spectrum.eigenvalues.size() ? nonzero_count(ws.back()->spectrum) : -1);
    norms.push_back(ws.back()->C.norm());
  }
  m["final_nonzero_eigenvalues"] = counts;
  m["final_C_norm"] = norms;
  j["metrics"] = m;
  j["events"] = log.events.size();
  return j;
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return (fs::path(env) / cfg.name).string();
  if (!cfg.output.empty()) return cfg.output;
  return (fs::path("runs") / cfg.name).string();
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_runlog(const RunLog& log, const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  {
    auto out = open_out(d / "steps.csv");
    out << "t";
    for (Eigen::Index i = 0; i < log.x.cols(); ++i) out << ",x" << i;
    for (Eigen::Index i = 0; i < log.y.cols(); ++i) out << ",y" << i;
    out << ",y_tilde_dot_norm,delta_norm";
    for (const auto& n : log.observable_names) out << "," << n;
    for (Eigen::Index i = 0; i < log.contacts.cols(); ++i) out << ",contact" << i;
    out << "\n";
    for (Eigen::Index r = 0; r < log.x.rows(); ++r) {
      out << log.t[r];
      for (Eigen::Index i = 0; i < log.x.cols(); ++i) out << "," << log.x(r, i);
      for (Eigen::Index i = 0; i < log.y.cols(); ++i) out << "," << log.y(r, i);
      out << "," << log.y_tilde_dot_norm(r) << "," << log.delta_norm(r);
      for (Eigen::Index i = 0; i < log.observables.cols(); ++i) out << "," << log.observables(r, i);
      for (Eigen::Index i = 0; i < log.contacts.cols(); ++i) out << "," << int(log.contacts(r, i));
      out << "\n";
    }
  }
  {
    auto out = open_out(d / "weights.csv");
    out << "t,agent,m,n,values\n";
    for (const auto& w : log.weights) {
      out << w.time << "," << w.agent << "," << w.C.rows() << "," << w.C.cols();
      for (Eigen::Index i = 0; i < w.C.rows(); ++i)
        for (Eigen::Index k = 0; k < w.C.cols(); ++k) out << "," << w.C(i, k);
      for (Eigen::Index i = 0; i < w.h.size(); ++i) out << "," << w.h(i);
      out << "\n";
    }
  }
  {
    auto out = open_out(d / "spectrum.csv");
    out << "t,agent,eigenvalues(re,im)...\n";
    for (const auto& w : log.weights) {
      out << w.time << "," << w.agent;
      for (Eigen::Index i = 0; i < w.spectrum.eigenvalues.size(); ++i)
        out << "," << w.spectrum.eigenvalues(i).real() << "," << w.spectrum.eigenvalues(i).imag();
      out << "\n";
    }
  }
  {
    auto out = open_out(d / "events.csv");
    out << "t,step,kind,detail\n";
    for (const auto& e : log.events) out << e.time << "," << e.step << "," << e.kind << "," << e.detail << "\n";
  }
  {
    json snaps = json::array();
    for (const auto& s : log.snapshots) {
      json a = json::array();
      for (const auto& c : s.agents) a.push_back(json::parse(snapshot_to_json(c)));
      snaps.push_back({{"time", s.time}, {"agents", a}});
    }
    json models = json::array();
    for (const auto& M : log.models) models.push_back(to_json(M));
    auto out = open_out(d / "snapshots.json");
    out << snaps.dump(1) << "\n";
    auto mout = open_out(d / "models.json");
    mout << models.dump() << "\n";
  }
  {
    auto out = open_out(d / "summary.json");
    out << summarize(log).dump(2) << "\n";
    auto cout_ = open_out(d / "config.json");
    cout_ << config_to_json(cfg).dump(2) << "\n";
  }
}

RunLog read_runlog(const std::string& dir) {
  const fs::path d(dir);
  RunLog log;
  const json summary = json::parse(read_file((d / "summary.json").string()));
  if (summary.value("schema", std::string()) != kRunLogSchema)
    throw ConfigError(dir + ": unsupported run log schema");
  log.name = summary.at("name").get<std::string>();
  log.dt = summary.at("dt").get<double>();
  log.agents = summary.at("agents").get<int>();

  std::ifstream in(d / "steps.csv");
  if (!in) throw ConfigError("cannot open steps.csv in " + dir);
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  std::vector<int> xs, ys, obs, con;
  int ytd = -1, dn = -1;
  for (int i = 1; i < static_cast<int>(header.size()); ++i) {
    const auto& h = header[i];
    if (h.rfind("contact", 0) == 0) con.push_back(i);
    else if (h == "y_tilde_dot_norm") ytd = i;
    else if (h == "delta_norm") dn = i;
    else if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) xs.push_back(i);
    else if (h.size() > 1 && h[0] == 'y' && std::isdigit(static_cast<unsigned char>(h[1]))) ys.push_back(i);
    else {
      obs.push_back(i);
      log.observable_names.push_back(h);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& c : split(line)) r.push_back(std::stod(c));
    rows.push_back(std::move(r));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  log.x.resize(n, xs.size());
  log.y.resize(n, ys.size());
  log.y_tilde_dot_norm.resize(n);
  log.delta_norm.resize(n);
  log.observables.resize(n, obs.size());
  log.contacts.resize(n, con.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    log.t.push_back(rows[r][0]);
    for (std::size_t i = 0; i < xs.size(); ++i) log.x(r, i) = rows[r][xs[i]];
    for (std::size_t i = 0; i < ys.size(); ++i) log.y(r, i) = rows[r][ys[i]];
    log.y_tilde_dot_norm(r) = ytd >= 0 ? rows[r][ytd] : 0.0;
    log.delta_norm(r) = dn >= 0 ? rows[r][dn] : 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) log.observables(r, i) = rows[r][obs[i]];
    for (std::size_t i = 0; i < con.size(); ++i) log.contacts(r, i) = rows[r][con[i]] != 0.0;
  }

  for (const auto& M : json::parse(read_file((d / "models.json").string()))) log.models.push_back(mat_from(M));

  std::ifstream win(d / "weights.csv");
  std::getline(win, line);
  while (std::getline(win, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    WeightSample w;
    w.time = std::stod(cells.at(0));
    w.agent = std::stoi(cells.at(1));
    const int m = std::stoi(cells.at(2)), k = std::stoi(cells.at(3));
    w.C.resize(m, k);
    w.h.resize(m);
    std::size_t c = 4;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) w.C(i, j) = std::stod(cells.at(c++));
    for (int i = 0; i < m; ++i) w.h(i) = std::stod(cells.at(c++));
    const MatrixXd& M = log.models.at(w.agent);
    if (M.rows() <= M.cols()) w.spectrum = spectrum(M, w.C, w.time);
    log.weights.push_back(std::move(w));
  }

  std::ifstream ein(d / "events.csv");
  std::getline(ein, line);
  while (std::getline(ein, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    cells.resize(4);
    log.events.push_back({std::stod(cells[0]), std::stol(cells[1]), cells[2], cells[3]});
  }

  for (const auto& s : json::parse(read_file((d / "snapshots.json").string()))) {
    Snapshot snap;
    snap.time = s.at("time").get<double>();
    for (const auto& a : s.at("agents")) snap.agents.push_back(snapshot_from_json(a.dump()));
    log.snapshots.push_back(std::move(snap));
  }
  return log;
}

// ---- sweeps

json set_path(json j, const std::string& dotted, const json& value) {
  std::string pointer;
  std::istringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) pointer += "/" + part;
  j[json::json_pointer(pointer)] = value;
  return j;
}

std::vector<json> expand_grid(const json& j) {
  std::vector<json> out{j};
  if (!j.contains("grid")) return out;
  out.front().erase("grid");
  for (const auto& [path, values] : j["grid"].items()) {
    std::vector<json> next;
    for (const auto& base : out)
      for (const auto& v : values) {
        json c = set_path(base, path, v);
        c["name"] = c.value("name", std::string("run")) + "_" + path + "=" + v.dump();
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs) {
  std::vector<SweepRow> rows;
  for (const auto& c : configs) {
    SweepRow r;
    r.name = c.name;
    try {
      r.metrics = summarize(run_experiment(c))["metrics"];
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  auto out = open_out(path);
  out << "name,ok,activity_variance,mean_omega,final_nonzero_eigenvalues,error\n";
  for (const auto& r : rows) {
    out << r.name << "," << (r.ok ? 1 : 0) << ",";
    if (r.ok) {
      out << r.metrics.value("activity_variance", 0.0) << ",";
      if (r.metrics.contains("mean_omega")) out << r.metrics["mean_omega"].get<double>();
      out << ",";
      const auto& c = r.metrics["final_nonzero_eigenvalues"];
      if (!c.empty()) out << c[0].get<int>();
      out << ",";
    } else {
      out << ",,,\"" << r.error << "\"";
    }
    out << "\n";
  }
}

}  // namespace dep
