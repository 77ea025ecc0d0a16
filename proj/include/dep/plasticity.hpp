#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace dep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Rule { Hebb, DHL, DEP };
enum class Normalization { Global, Individual };

std::string to_string(Rule r);
std::string to_string(Normalization n);
Rule rule_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);

struct PlasticityParams {
  Rule rule = Rule::DEP;
  double tau = 0.4;
  std::optional<double> tau_h;  // empty: threshold dynamics off, h pinned
  double kappa = 1.0;
  double rho = 1e-12;
  Normalization normalization = Normalization::Global;
  double dt = 0.02;

  void validate() const;
};

// kappa / (norm + rho), stepped down by ulps when rounding would land the result on kappa
template <typename Derived>
double capped_scale(const Eigen::MatrixBase<Derived>& v, double norm, double kappa, double rho) {
  double s = kappa / (norm + rho);
  while (norm > 0 && (s * v).norm() >= kappa) s = std::nextafter(s, 0.0);
  return s;
}

template <typename Derived>
typename Derived::PlainObject normalize_global(const Eigen::MatrixBase<Derived>& C, double kappa,
                                               double rho) {
  const double n = C.norm();
  return capped_scale(C, n, kappa, rho) * C;
}

template <typename Derived>
typename Derived::PlainObject normalize_individual(const Eigen::MatrixBase<Derived>& C,
                                                   double kappa, double rho) {
  typename Derived::PlainObject out = C;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) *= capped_scale(C.row(i), C.row(i).norm(), kappa, rho);
  return out;
}

MatrixXd normalize(const MatrixXd& C, const PlasticityParams& p);

// C + dt/tau (post pre^T - C), no normalization
template <typename DerivedC, typename DerivedA, typename DerivedB>
typename DerivedC::PlainObject learning_step(const Eigen::MatrixBase<DerivedC>& C,
                                             const Eigen::MatrixBase<DerivedA>& post,
                                             const Eigen::MatrixBase<DerivedB>& pre, double dt,
                                             double tau) {
  return C + (dt / tau) * (post * pre.transpose() - C);
}

MatrixXd dep_update(const MatrixXd& C, const VectorXd& y_tilde_dot, const VectorXd& x_dot,
                    const PlasticityParams& p);
MatrixXd dhl_update(const MatrixXd& C, const VectorXd& y_dot, const VectorXd& x_dot,
                    const PlasticityParams& p);
MatrixXd hebb_update(const MatrixXd& C, const VectorXd& y, const VectorXd& x,
                     const PlasticityParams& p);

VectorXd threshold_update(const VectorXd& h, const VectorXd& y, const PlasticityParams& p);

class DerivativeBuffer {
 public:
  explicit DerivativeBuffer(Eigen::Index size = 0) : previous_(VectorXd::Zero(size)) {}

  // first call has no history and yields zero
  VectorXd update(const VectorXd& sample, double dt);

  bool primed() const { return primed_; }
  const VectorXd& previous() const { return previous_; }
  double timestamp() const { return time_; }

 private:
  VectorXd previous_;
  bool primed_ = false;
  double time_ = 0.0;
};

VectorXd estimate_derivative(DerivativeBuffer& buffer, const VectorXd& sample, double dt);

}  // namespace dep
