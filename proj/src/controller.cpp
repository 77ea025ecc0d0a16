#include "dep/controller.hpp"

#include <json.hpp>

namespace dep {

ControllerState init_least_biased(Eigen::Index n, Eigen::Index m) {
  if (n < 1 || m < 1) throw DimensionError("controller dimensions must be positive");
  return ControllerState{MatrixXd::Zero(m, n), VectorXd::Zero(m), false};
}

VectorXd step_controller(const ControllerState& state, const VectorXd& x) {
  if (x.size() != state.sensors())
    throw DimensionError("sensor vector has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(state.sensors()));
  return motor_output(state.C, x, state.h);
}

ControllerState load_weights(const ControllerState& state, const MatrixXd& C_fixed,
                             const VectorXd& h_fixed, bool frozen) {
  if (C_fixed.rows() != state.motors() || C_fixed.cols() != state.sensors() ||
      h_fixed.size() != state.motors())
    throw DimensionError("weight shape does not match controller");
  if (!C_fixed.allFinite() || !h_fixed.allFinite())
    throw std::invalid_argument("weights contain non-finite entries");
  return ControllerState{C_fixed, h_fixed, frozen};
}

bool all_finite(const ControllerState& state) { return state.C.allFinite() && state.h.allFinite(); }

std::string snapshot_to_json(const ControllerState& state) {
  nlohmann::json j;
  j["m"] = state.motors();
  j["n"] = state.sensors();
  std::vector<double> flat;
  flat.reserve(state.C.size());
  for (Eigen::Index i = 0; i < state.C.rows(); ++i)
    for (Eigen::Index k = 0; k < state.C.cols(); ++k) flat.push_back(state.C(i, k));
  j["C"] = flat;
  j["h"] = std::vector<double>(state.h.data(), state.h.data() + state.h.size());
  return j.dump();
}

ControllerState snapshot_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  const auto m = j.at("m").get<Eigen::Index>();
  const auto n = j.at("n").get<Eigen::Index>();
  auto flat = j.at("C").get<std::vector<double>>();
  auto h = j.at("h").get<std::vector<double>>();
  if (m < 1 || n < 1 || static_cast<Eigen::Index>(flat.size()) != m * n ||
      static_cast<Eigen::Index>(h.size()) != m)
    throw DimensionError("snapshot shape is inconsistent");
  ControllerState s = init_least_biased(n, m);
  s.C = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), m, n);
  s.h = Eigen::Map<const VectorXd>(h.data(), m);
  if (!all_finite(s)) throw std::invalid_argument("snapshot contains non-finite entries");
  return s;
}

}  // namespace dep
