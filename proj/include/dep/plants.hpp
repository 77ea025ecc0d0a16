#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace dep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Perturbation {
  enum class Kind { Kick, Torque, Clamp };
  Kind kind = Kind::Kick;
  int target = 0;          // joint index (ignored by the wheel)
  double magnitude = 0.0;  // kick: velocity impulse, torque: signed torque
  double duration = 0.0;   // seconds, torque and clamp only
  double time = 0.0;       // schedule time in seconds
};

std::string to_string(Perturbation::Kind k);
Perturbation::Kind perturbation_kind_from_string(const std::string& s);

class Plant {
 public:
  virtual ~Plant() = default;

  virtual int sensors() const = 0;
  virtual int motors() const = 0;
  // independent controllers share the plant; sensors and motors split evenly between them
  virtual int agents() const { return 1; }
  virtual double dt() const = 0;

  // clamped to [-1, 1]
  virtual VectorXd read() const = 0;
  // advances one step; y_t shows up in the returned x_{t+1}
  VectorXd step(const VectorXd& y);
  virtual void apply_perturbation(const Perturbation& p) = 0;

  virtual std::vector<bool> contacts() const { return {}; }
  virtual std::vector<std::string> observable_names() const { return {}; }
  virtual VectorXd observables() const { return VectorXd(); }
  virtual double energy() const = 0;
  virtual std::unique_ptr<Plant> clone() const = 0;

 protected:
  virtual void advance(const VectorXd& y) = 0;
};

// x_{t+1} = (1 - beta) x_t + beta U(theta) y_t, U rotates coordinate pairs (0,1), (2,3), ...
struct LinearPlantParams {
  int n = 2;
  double beta = 1.0;
  double theta = 0.0;
  double dt = 0.02;
  VectorXd initial;  // empty: zero
};

class LinearDelayPlant : public Plant {
 public:
  explicit LinearDelayPlant(LinearPlantParams p);

  int sensors() const override { return p_.n; }
  int motors() const override { return p_.n; }
  double dt() const override { return p_.dt; }
  VectorXd read() const override;
  void apply_perturbation(const Perturbation& p) override;
  double energy() const override { return 0.5 * x_.squaredNorm(); }
  std::unique_ptr<Plant> clone() const override { return std::make_unique<LinearDelayPlant>(*this); }

  const MatrixXd& rotation() const { return U_; }
  const VectorXd& state() const { return x_; }

 protected:
  void advance(const VectorXd& y) override;

 private:
  LinearPlantParams p_;
  MatrixXd U_;
  VectorXd x_;
  std::vector<int> clamp_left_;
  VectorXd clamp_value_;
};

// J th'' = k (y - th) - c th' + sum_j K_ij (th_j - th_i) + torque
struct ChainParams {
  int n = 18;
  double J = 1.0;
  double k = 40.0;
  double c = 2.0;
  double dt = 0.02;
  MatrixXd coupling;  // symmetric, zero diagonal
  std::vector<int> contact_joints;
  double contact_threshold = 0.0;  // foot down when th below this

  static MatrixXd nearest_neighbor(int n, double strength);
};

class JointChain : public Plant {
 public:
  explicit JointChain(ChainParams p);

  int sensors() const override { return p_.n; }
  int motors() const override { return p_.n; }
  double dt() const override { return p_.dt; }
  VectorXd read() const override;
  void apply_perturbation(const Perturbation& p) override;
  std::vector<bool> contacts() const override;
  double energy() const override;
  std::unique_ptr<Plant> clone() const override { return std::make_unique<JointChain>(*this); }

  const VectorXd& angles() const { return theta_; }
  const VectorXd& velocities() const { return omega_; }
  void set_state(const VectorXd& theta, const VectorXd& omega);
  const ChainParams& params() const { return p_; }

 protected:
  void advance(const VectorXd& y) override;

 private:
  ChainParams p_;
  VectorXd theta_, omega_, torque_;
  std::vector<int> torque_left_, clamp_left_;
  VectorXd clamp_value_;
};

// Each agent holds a crank handle at angle phi + 2 pi a / agents; its two joint sensors are the
// handle coordinates. The joints pull the handle toward the commanded point with stiffness k.
struct WheelParams {
  int agents = 1;
  double J_w = 1.0;
  double J_a = 0.05;      // per-agent arm inertia at the handle
  double k = 20.0;
  double c = 1.0;         // joint damping
  double b = 0.05;        // viscous axle friction
  double friction = 1.0;  // Coulomb axle friction, also the breakaway torque
  double radius = 0.8;
  double dt = 0.02;
};

class CrankWheel : public Plant {
 public:
  explicit CrankWheel(WheelParams p);

  int sensors() const override { return 2 * p_.agents; }
  int motors() const override { return 2 * p_.agents; }
  int agents() const override { return p_.agents; }
  double dt() const override { return p_.dt; }
  VectorXd read() const override;
  void apply_perturbation(const Perturbation& p) override;
  double energy() const override { return 0.5 * inertia() * omega_ * omega_; }
  std::vector<std::string> observable_names() const override { return {"phi", "omega"}; }
  VectorXd observables() const override { return Eigen::Vector2d(phi_, omega_); }
  std::unique_ptr<Plant> clone() const override { return std::make_unique<CrankWheel>(*this); }

  double angle() const { return phi_; }
  double velocity() const { return omega_; }
  double inertia() const { return p_.J_w + p_.agents * p_.J_a * p_.radius * p_.radius; }

 protected:
  void advance(const VectorXd& y) override;

 private:
  WheelParams p_;
  double phi_ = 0.0, omega_ = 0.0;
  double torque_ = 0.0;
  int torque_left_ = 0, clamp_left_ = 0;
};

int duration_steps(double duration, double dt);

}  // namespace dep
