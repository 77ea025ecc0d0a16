#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dep/analysis.hpp"
#include "dep/controller.hpp"
#include "dep/inverse_model.hpp"
#include "dep/plants.hpp"
#include "dep/plasticity.hpp"

namespace dep {

inline constexpr const char* kRunLogSchema = "dep-runlog/1";
inline constexpr const char* kOutputDirEnv = "DEP_OUTPUT_DIR";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  NumericError(long step, const std::string& what)
      : std::runtime_error(what + " at step " + std::to_string(step)), step(step) {}
  long step;
};

struct RecallSwitch {
  double time = 0.0;
  int agent = 0;
  ControllerState weights;
};

struct ExperimentConfig {
  std::string name = "run";
  double duration = 10.0;
  double log_interval = 0.5;
  std::string plant_type = "chain";  // linear | chain | wheel
  LinearPlantParams linear;
  ChainParams chain;
  WheelParams wheel;
  PlasticityParams plasticity;
  std::string model = "identity";   // preset name, "entries" or "learned"
  std::vector<GuidedEntry> model_entries;
  double babble_duration = 20.0;    // for learned models
  std::optional<DelayedSensorConfig> delayed;
  // seed the learning accumulator
  std::optional<MatrixXd> initial_weights;
  std::optional<double> initial_identity;
  std::vector<Perturbation> perturbations;
  std::vector<double> snapshot_times;
  std::vector<RecallSwitch> recall;
  std::string output;
  std::shared_ptr<ExperimentConfig> copy_source;
  double copy_time = 0.0;

  nlohmann::json source;  // tree this config was parsed from

  int steps() const;
  void validate() const;
};

// base_dir resolves relative paths (copy sources, recall snapshots)
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

std::unique_ptr<Plant> make_plant(const ExperimentConfig& cfg);

// probes the plant with slow independent sinusoids and fits y' from the x' they cause
OfflineModel learn_model_by_babbling(const Plant& plant, double duration, double amplitude = 0.5);

struct WeightSample {
  double time = 0.0;
  int agent = 0;
  MatrixXd C;
  VectorXd h;
  SpectrumSample spectrum;
};

struct Event {
  double time = 0.0;
  long step = 0;
  std::string kind;
  std::string detail;
};

struct Snapshot {
  double time = 0.0;
  std::vector<ControllerState> agents;
};

struct RunLog {
  std::string name;
  double dt = 0.02;
  int agents = 1;
  std::vector<double> t;
  MatrixXd x, y;                // rows are steps, agents concatenated
  VectorXd y_tilde_dot_norm, delta_norm;
  MatrixXd observables;         // plant specific columns
  std::vector<std::string> observable_names;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> contacts;
  std::vector<WeightSample> weights;
  std::vector<Event> events;
  std::vector<Snapshot> snapshots;
  std::vector<MatrixXd> models;  // per agent

  // rows of x (all channels) with t in [from, to)
  MatrixXd window(double from, double to) const;
  Eigen::Index row_at(double time) const;
  std::vector<const WeightSample*> weights_for(int agent) const;
  int observable(const std::string& name) const;
};

struct AgentState {
  PlasticityParams params;
  ControllerState controller;
  MatrixXd raw;  // learning accumulator before normalization
  MatrixXd M;
  DelayLine delay;
  DerivativeBuffer x_buffer;
  VectorXd x, x_prev, x_dot, x_dot_prev, y_prev, y_prev2;
  VectorXd y_tilde_dot, delta;
  int sensor_offset = 0, motor_offset = 0, base_sensors = 0;
};

class Simulation {
 public:
  explicit Simulation(const ExperimentConfig& cfg);

  void step();
  void run();

  long step_index() const { return step_; }
  double time() const { return step_ * cfg_.plasticity.dt; }
  Plant& plant() { return *plant_; }
  const Plant& plant() const { return *plant_; }
  int agents() const { return static_cast<int>(agents_.size()); }
  AgentState& agent(int a) { return agents_.at(a); }
  const AgentState& agent(int a) const { return agents_.at(a); }
  const RunLog& log() const { return log_; }
  RunLog take_log() { return std::move(log_); }

  void copy_weights_from(const Simulation& other);
  void load(int agent, const ControllerState& weights, bool frozen);

 private:
  void apply_events();
  void record_weights();
  void event(const std::string& kind, const std::string& detail);

  ExperimentConfig cfg_;
  std::unique_ptr<Plant> plant_;
  std::vector<AgentState> agents_;
  std::unique_ptr<Simulation> source_;
  RunLog log_;
  long step_ = 0;
  int log_every_ = 25;
};

RunLog run_experiment(const ExperimentConfig& cfg);
RunLog schedule_recall(const ExperimentConfig& cfg, const std::vector<RecallSwitch>& sequence);

// run summary with the schema tag
nlohmann::json summarize(const RunLog& log);

std::string resolve_output_dir(const ExperimentConfig& cfg);
void write_runlog(const RunLog& log, const ExperimentConfig& cfg, const std::string& dir);
RunLog read_runlog(const std::string& dir);

nlohmann::json set_path(nlohmann::json j, const std::string& dotted, const nlohmann::json& value);
std::vector<nlohmann::json> expand_grid(const nlohmann::json& j);

struct SweepRow {
  std::string name;
  bool ok = false;
  std::string error;
  nlohmann::json metrics;
};

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace dep
