#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// y = tanh(C x + h)
template <typename DerivedC, typename DerivedX, typename DerivedH>
auto motor_output(const Eigen::MatrixBase<DerivedC>& C, const Eigen::MatrixBase<DerivedX>& x,
                  const Eigen::MatrixBase<DerivedH>& h) {
  return (C * x + h).array().tanh().matrix();
}

struct ControllerState {
  MatrixXd C;
  VectorXd h;
  bool frozen = false;

  Eigen::Index motors() const { return C.rows(); }
  Eigen::Index sensors() const { return C.cols(); }
};

ControllerState init_least_biased(Eigen::Index n, Eigen::Index m);

VectorXd step_controller(const ControllerState& state, const VectorXd& x);

ControllerState load_weights(const ControllerState& state, const MatrixXd& C_fixed,
                             const VectorXd& h_fixed, bool frozen);

bool all_finite(const ControllerState& state);

std::string snapshot_to_json(const ControllerState& state);
ControllerState snapshot_from_json(const std::string& text);

}  // namespace dep
