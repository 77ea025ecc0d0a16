#include "dep/plasticity.hpp"

#include "dep/controller.hpp"

namespace dep {

std::string to_string(Rule r) {
  switch (r) {
    case Rule::Hebb: return "Hebb";
    case Rule::DHL: return "DHL";
    case Rule::DEP: return "DEP";
  }
  return "?";
}

std::string to_string(Normalization n) {
  return n == Normalization::Global ? "Global" : "Individual";
}

Rule rule_from_string(const std::string& s) {
  if (s == "Hebb" || s == "hebb") return Rule::Hebb;
  if (s == "DHL" || s == "dhl") return Rule::DHL;
  if (s == "DEP" || s == "dep") return Rule::DEP;
  throw std::invalid_argument("unknown rule '" + s + "'");
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "Global" || s == "global") return Normalization::Global;
  if (s == "Individual" || s == "individual") return Normalization::Individual;
  throw std::invalid_argument("unknown normalization '" + s + "'");
}

void PlasticityParams::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(tau >= dt)) throw std::invalid_argument("tau must be at least dt");
  if (tau_h && !(*tau_h > 0)) throw std::invalid_argument("tau_h must be positive");
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
}

MatrixXd normalize(const MatrixXd& C, const PlasticityParams& p) {
  return p.normalization == Normalization::Global ? normalize_global(C, p.kappa, p.rho)
                                                  : normalize_individual(C, p.kappa, p.rho);
}

namespace {

void check_update(const MatrixXd& C, const VectorXd& post, const VectorXd& pre) {
  if (post.size() != C.rows() || pre.size() != C.cols())
    throw DimensionError("learning signal does not match weight shape");
  if (!C.allFinite() || !post.allFinite() || !pre.allFinite())
    throw std::invalid_argument("non-finite input to plasticity update");
}

}  // namespace

MatrixXd dep_update(const MatrixXd& C, const VectorXd& y_tilde_dot, const VectorXd& x_dot,
                    const PlasticityParams& p) {
  check_update(C, y_tilde_dot, x_dot);
  return learning_step(C, y_tilde_dot, x_dot, p.dt, p.tau);
}

MatrixXd dhl_update(const MatrixXd& C, const VectorXd& y_dot, const VectorXd& x_dot,
                    const PlasticityParams& p) {
  check_update(C, y_dot, x_dot);
  return learning_step(C, y_dot, x_dot, p.dt, p.tau);
}

MatrixXd hebb_update(const MatrixXd& C, const VectorXd& y, const VectorXd& x,
                     const PlasticityParams& p) {
  check_update(C, y, x);
  return learning_step(C, y, x, p.dt, p.tau);
}

VectorXd threshold_update(const VectorXd& h, const VectorXd& y, const PlasticityParams& p) {
  if (!p.tau_h) return h;
  if (h.size() != y.size()) throw DimensionError("threshold and output lengths differ");
  return h - (p.dt / *p.tau_h) * y;
}

VectorXd DerivativeBuffer::update(const VectorXd& sample, double dt) {
  if (previous_.size() != sample.size() && primed_)
    throw DimensionError("derivative buffer length changed");
  VectorXd d = primed_ ? VectorXd((sample - previous_) / dt) : VectorXd::Zero(sample.size());
  previous_ = sample;
  time_ = primed_ ? time_ + dt : 0.0;
  primed_ = true;
  return d;
}

VectorXd estimate_derivative(DerivativeBuffer& buffer, const VectorXd& sample, double dt) {
  return buffer.update(sample, dt);
}

}  // namespace dep
