#include "dep/plants.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dep/controller.hpp"

namespace dep {

std::string to_string(Perturbation::Kind k) {
  switch (k) {
    case Perturbation::Kind::Kick: return "Kick";
    case Perturbation::Kind::Torque: return "Torque";
    case Perturbation::Kind::Clamp: return "Clamp";
  }
  return "?";
}

Perturbation::Kind perturbation_kind_from_string(const std::string& s) {
  if (s == "Kick" || s == "kick") return Perturbation::Kind::Kick;
  if (s == "Torque" || s == "torque") return Perturbation::Kind::Torque;
  if (s == "Clamp" || s == "clamp") return Perturbation::Kind::Clamp;
  throw std::invalid_argument("unknown perturbation kind '" + s + "'");
}

int duration_steps(double duration, double dt) {
  if (!(duration >= 0)) throw std::invalid_argument("negative perturbation duration");
  return static_cast<int>(std::lround(duration / dt));
}

VectorXd Plant::step(const VectorXd& y) {
  if (y.size() != motors()) throw DimensionError("motor vector has wrong length");
  advance(y);
  return read();
}

namespace {

VectorXd clamp_unit(const VectorXd& v) { return v.cwiseMax(-1.0).cwiseMin(1.0); }

void check_target(int target, int n) {
  if (target < 0 || target >= n) throw std::out_of_range("perturbation target out of range");
}

}  // namespace

// ---- linear / rotation plant

LinearDelayPlant::LinearDelayPlant(LinearPlantParams p) : p_(std::move(p)) {
  if (p_.n < 1) throw DimensionError("plant needs at least one channel");
  if (!(p_.beta > 0 && p_.beta <= 1)) throw std::invalid_argument("beta must lie in (0, 1]");
  U_ = MatrixXd::Identity(p_.n, p_.n);
  const double c = std::cos(p_.theta), s = std::sin(p_.theta);
  for (int i = 0; i + 1 < p_.n; i += 2) {
    U_(i, i) = c;
    U_(i, i + 1) = -s;
    U_(i + 1, i) = s;
    U_(i + 1, i + 1) = c;
  }
  x_ = p_.initial.size() ? p_.initial : VectorXd::Zero(p_.n);
  if (x_.size() != p_.n) throw DimensionError("initial state has wrong length");
  clamp_left_.assign(p_.n, 0);
  clamp_value_ = VectorXd::Zero(p_.n);
}

VectorXd LinearDelayPlant::read() const { return clamp_unit(x_); }

void LinearDelayPlant::advance(const VectorXd& y) {
  x_ = (1.0 - p_.beta) * x_ + p_.beta * (U_ * y);
  for (int i = 0; i < p_.n; ++i)
    if (clamp_left_[i] > 0) {
      x_(i) = clamp_value_(i);
      --clamp_left_[i];
    }
}

void LinearDelayPlant::apply_perturbation(const Perturbation& p) {
  check_target(p.target, p_.n);
  switch (p.kind) {
    case Perturbation::Kind::Kick: x_(p.target) += p.magnitude; break;
    case Perturbation::Kind::Clamp:
      clamp_left_[p.target] = duration_steps(p.duration, p_.dt);
      clamp_value_(p.target) = x_(p.target);
      break;
    case Perturbation::Kind::Torque: throw std::invalid_argument("linear plant takes no torque");
  }
}

// ---- joint chain

MatrixXd ChainParams::nearest_neighbor(int n, double strength) {
  MatrixXd K = MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) K(i, i + 1) = K(i + 1, i) = strength;
  return K;
}

JointChain::JointChain(ChainParams p) : p_(std::move(p)) {
  const int n = p_.n;
  if (n < 1) throw DimensionError("chain needs at least one joint");
  if (!(p_.J > 0 && p_.k >= 0 && p_.c >= 0 && p_.dt > 0))
    throw std::invalid_argument("chain parameters must be positive");
  if (p_.coupling.size() == 0) p_.coupling = MatrixXd::Zero(n, n);
  if (p_.coupling.rows() != n || p_.coupling.cols() != n) throw DimensionError("coupling must be n x n");
  for (int j : p_.contact_joints) check_target(j, n);

  // linearized semi-implicit Euler map must not expand
  MatrixXd A = p_.k * MatrixXd::Identity(n, n);
  A.diagonal() += p_.coupling.rowwise().sum();
  A -= p_.coupling;
  const double h = p_.dt, damp = 1.0 - h * p_.c / p_.J;
  MatrixXd step(2 * n, 2 * n);
  step.topLeftCorner(n, n) = MatrixXd::Identity(n, n) - h * h / p_.J * A;
  step.topRightCorner(n, n) = h * damp * MatrixXd::Identity(n, n);
  step.bottomLeftCorner(n, n) = -h / p_.J * A;
  step.bottomRightCorner(n, n) = damp * MatrixXd::Identity(n, n);
  const double radius = step.eigenvalues().cwiseAbs().maxCoeff();
  if (radius > 1.0 + 1e-9)
    throw std::invalid_argument("chain parameters are unstable at this dt (spectral radius " +
                                std::to_string(radius) + ")");

  theta_ = omega_ = torque_ = VectorXd::Zero(n);
  clamp_value_ = VectorXd::Zero(n);
  torque_left_.assign(n, 0);
  clamp_left_.assign(n, 0);
}

VectorXd JointChain::read() const { return clamp_unit(theta_); }

void JointChain::set_state(const VectorXd& theta, const VectorXd& omega) {
  if (theta.size() != p_.n || omega.size() != p_.n) throw DimensionError("chain state has wrong length");
  theta_ = theta;
  omega_ = omega;
}

void JointChain::advance(const VectorXd& y) {
  const MatrixXd& K = p_.coupling;
  VectorXd tq = p_.k * (y - theta_) - p_.c * omega_ + K * theta_ -
                (K.rowwise().sum().array() * theta_.array()).matrix();
  for (int i = 0; i < p_.n; ++i)
    if (torque_left_[i] > 0) {
      tq(i) += torque_(i);
      if (--torque_left_[i] == 0) torque_(i) = 0.0;
    }
  omega_ += p_.dt / p_.J * tq;
  theta_ += p_.dt * omega_;
  for (int i = 0; i < p_.n; ++i)
    if (clamp_left_[i] > 0) {
      theta_(i) = clamp_value_(i);
      omega_(i) = 0.0;
      --clamp_left_[i];
    }
}

void JointChain::apply_perturbation(const Perturbation& p) {
  check_target(p.target, p_.n);
  switch (p.kind) {
    case Perturbation::Kind::Kick: omega_(p.target) += p.magnitude; break;
    case Perturbation::Kind::Torque:
      torque_(p.target) = p.magnitude;
      torque_left_[p.target] = duration_steps(p.duration, p_.dt);
      break;
    case Perturbation::Kind::Clamp:
      clamp_value_(p.target) = theta_(p.target);
      omega_(p.target) = 0.0;
      clamp_left_[p.target] = duration_steps(p.duration, p_.dt);
      break;
  }
}

std::vector<bool> JointChain::contacts() const {
  std::vector<bool> out;
  out.reserve(p_.contact_joints.size());
  for (int j : p_.contact_joints) out.push_back(theta_(j) < p_.contact_threshold);
  return out;
}

double JointChain::energy() const {
  double e = 0.5 * p_.J * omega_.squaredNorm() + 0.5 * p_.k * theta_.squaredNorm();
  for (int i = 0; i < p_.n; ++i)
    for (int j = i + 1; j < p_.n; ++j) e += 0.5 * p_.coupling(i, j) * std::pow(theta_(i) - theta_(j), 2);
  return e;
}

// ---- crank wheel

CrankWheel::CrankWheel(WheelParams p) : p_(p) {
  if (p_.agents < 1) throw DimensionError("wheel needs at least one agent");
  if (!(p_.J_w > 0 && p_.J_a >= 0 && p_.k >= 0 && p_.c >= 0 && p_.b >= 0 && p_.friction >= 0 &&
        p_.dt > 0))
    throw std::invalid_argument("wheel parameters must be non-negative, J_w and dt positive");
  if (!(p_.radius > 0 && p_.radius <= 1)) throw std::invalid_argument("crank radius must lie in (0, 1]");
  const double stiff = p_.agents * p_.k * p_.radius * p_.radius;
  const double damp = p_.b + p_.agents * p_.c * p_.radius * p_.radius;
  if (stiff * p_.dt * p_.dt / inertia() >= 4.0 || damp * p_.dt / inertia() >= 2.0)
    throw std::invalid_argument("wheel parameters are unstable at this dt");
}

VectorXd CrankWheel::read() const {
  VectorXd x(sensors());
  for (int a = 0; a < p_.agents; ++a) {
    const double ang = phi_ + 2.0 * std::numbers::pi * a / p_.agents;
    x(2 * a) = p_.radius * std::cos(ang);
    x(2 * a + 1) = p_.radius * std::sin(ang);
  }
  return x;
}

void CrankWheel::advance(const VectorXd& y) {
  double tq = -p_.b * omega_;
  for (int a = 0; a < p_.agents; ++a) {
    const double ang = phi_ + 2.0 * std::numbers::pi * a / p_.agents;
    const double cx = p_.radius * std::cos(ang), cy = p_.radius * std::sin(ang);
    // tangential direction d(cx, cy)/dphi = (-cy, cx)
    tq += p_.k * ((y(2 * a) - cx) * -cy + (y(2 * a + 1) - cy) * cx);
    tq -= p_.c * p_.radius * p_.radius * omega_;
  }
  if (torque_left_ > 0) {
    tq += torque_;
    --torque_left_;
  }
  if (clamp_left_ > 0) {
    omega_ = 0.0;
    --clamp_left_;
    return;
  }
  if (omega_ == 0.0) {
    if (std::abs(tq) <= p_.friction) return;  // stuck
    const double next = p_.dt * (tq - std::copysign(p_.friction, tq)) / inertia();
    omega_ = next;
  } else {
    const double next = omega_ + p_.dt * (tq - std::copysign(p_.friction, omega_)) / inertia();
    omega_ = (next * omega_ < 0.0) ? 0.0 : next;
  }
  phi_ += p_.dt * omega_;
}

void CrankWheel::apply_perturbation(const Perturbation& p) {
  switch (p.kind) {
    case Perturbation::Kind::Kick: omega_ += p.magnitude; break;
    case Perturbation::Kind::Torque:
      torque_ = p.magnitude;
      torque_left_ = duration_steps(p.duration, p_.dt);
      break;
    case Perturbation::Kind::Clamp:
      omega_ = 0.0;
      clamp_left_ = duration_steps(p.duration, p_.dt);
      break;
  }
}

}  // namespace dep
