#include "dep/inverse_model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "dep/controller.hpp"

namespace dep {

VectorXd apply_model(const MatrixXd& M, const VectorXd& x_prime_dot) {
  if (M.cols() != x_prime_dot.size()) throw DimensionError("model columns do not match sensor derivative");
  return M * x_prime_dot;
}

VectorXd extrinsic_signal(const VectorXd& y_tilde_dot, const VectorXd& y_dot) {
  if (y_tilde_dot.size() != y_dot.size()) throw DimensionError("motor derivative lengths differ");
  return y_tilde_dot - y_dot;
}

OfflineModel learn_model_offline(const std::vector<std::pair<VectorXd, VectorXd>>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const auto n = samples.front().first.size();
  const auto m = samples.front().second.size();
  MatrixXd X(n, samples.size()), Y(m, samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].first.size() != n || samples[s].second.size() != m)
      throw DimensionError("sample dimensions are inconsistent");
    X.col(s) = samples[s].first;
    Y.col(s) = samples[s].second;
  }
  OfflineModel out;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X.transpose());
  if (qr.rank() == n) {
    out.M = qr.solve(Y.transpose()).transpose();
  } else {
    MatrixXd G = X * X.transpose();
    G.diagonal().array() += kRidgeLambda;
    out.M = G.ldlt().solve(X * Y.transpose()).transpose();
    out.ridge = true;
  }
  out.residual = (out.M * X - Y).norm();
  return out;
}

MatrixXd build_guided_model(const std::vector<GuidedEntry>& entries, int m, int n) {
  if (m < 1 || n < 1) throw DimensionError("model dimensions must be positive");
  MatrixXd M = MatrixXd::Zero(m, n);
  std::map<std::pair<int, int>, int> seen;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= n)
      throw std::out_of_range("model entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                              ") out of range");
    if (e.sign != 1 && e.sign != -1) throw std::invalid_argument("model entry sign must be +1 or -1");
    auto [it, fresh] = seen.emplace(std::make_pair(e.row, e.col), e.sign);
    if (!fresh && it->second != e.sign)
      throw std::invalid_argument("contradictory signs for model entry (" + std::to_string(e.row) +
                                  "," + std::to_string(e.col) + ")");
    M(e.row, e.col) = e.sign;
  }
  return M;
}

namespace hexapod {

std::vector<int> delayed_sources() {
  std::vector<int> idx;
  for (int l = 0; l < kLegs; ++l) {
    idx.push_back(ap(l));
    idx.push_back(ud(l));
  }
  return idx;
}

namespace {

void self_links(std::vector<GuidedEntry>& e) {
  for (int j = 0; j < kJoints; ++j) e.push_back({j, j, 1});
  for (int l = 0; l < kLegs; ++l) e.push_back({ud(l), delayed_ap(l), 1});
}

constexpr int kSubsequent[4][2] = {{0, 1}, {1, 2}, {3, 4}, {4, 5}};

}  // namespace

std::vector<GuidedEntry> m1_entries() {
  std::vector<GuidedEntry> e;
  self_links(e);
  for (auto [a, b] : kSubsequent) e.push_back({ap(b), ap(a), -1});
  return e;
}

std::vector<GuidedEntry> m2_entries() {
  std::vector<GuidedEntry> e;
  self_links(e);
  for (auto [a, b] : kSubsequent) e.push_back({ap(b), delayed_ap(a), 1});
  for (int l = 0; l < 3; ++l) {
    e.push_back({ap(l), ap(l + 3), -1});
    e.push_back({ap(l + 3), ap(l), -1});
  }
  return e;
}

}  // namespace hexapod

MatrixXd model_preset(const std::string& name, int m, int n) {
  if (name == "identity") {
    if (m < 1 || n < 1) throw DimensionError("model dimensions must be positive");
    return MatrixXd::Identity(m, n);
  }
  if (name == "hexapod-m1" || name == "hexapod-m2") {
    if (m != hexapod::kJoints || n != hexapod::kJoints + hexapod::kDelayed)
      throw DimensionError(name + " needs an 18x30 loop");
    return build_guided_model(name == "hexapod-m1" ? hexapod::m1_entries() : hexapod::m2_entries(), m, n);
  }
  throw std::invalid_argument("unknown model preset '" + name + "'");
}

int DelayedSensorConfig::steps(double dt) const {
  const double k = delay / dt;
  const double r = std::round(k);
  if (delay < 0 || std::abs(k - r) > 1e-9 * std::max(1.0, k))
    throw std::invalid_argument("sensor delay must be a non-negative multiple of dt");
  return static_cast<int>(r);
}

DelayLine::DelayLine(DelayedSensorConfig cfg, int base_size, double dt)
    : cfg_(std::move(cfg)), base_size_(base_size), steps_(cfg_.steps(dt)) {
  for (int i : cfg_.indices)
    if (i < 0 || i >= base_size_) throw std::out_of_range("delayed sensor index out of range");
}

VectorXd DelayLine::extend(const VectorXd& base) {
  if (base.size() != base_size_) throw DimensionError("delay line input has wrong length");
  history_.push_back(base);
  if (static_cast<int>(history_.size()) > steps_ + 1) history_.pop_front();
  const bool full = static_cast<int>(history_.size()) == steps_ + 1;
  VectorXd out(base_size_ + extra());
  out.head(base_size_) = base;
  for (int k = 0; k < extra(); ++k) out(base_size_ + k) = full ? history_.front()(cfg_.indices[k]) : 0.0;
  return out;
}

}  // namespace dep
