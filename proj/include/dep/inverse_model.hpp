#pragma once

#include <Eigen/Dense>
#include <deque>
#include <string>
#include <utility>
#include <vector>

namespace dep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// y~' = M x'
VectorXd apply_model(const MatrixXd& M, const VectorXd& x_prime_dot);

// dy' = y~' - y'
VectorXd extrinsic_signal(const VectorXd& y_tilde_dot, const VectorXd& y_dot);

struct OfflineModel {
  MatrixXd M;
  double residual = 0.0;
  bool ridge = false;  // set when the samples were rank deficient
};

inline constexpr double kRidgeLambda = 1e-6;

OfflineModel learn_model_offline(const std::vector<std::pair<VectorXd, VectorXd>>& samples);

struct GuidedEntry {
  int row = 0;
  int col = 0;
  int sign = 1;
};

MatrixXd build_guided_model(const std::vector<GuidedEntry>& entries, int m, int n);

// Hexapod layout: leg l in 0..5 (0-2 left front to rear, 3-5 right), joints 3l (anterior/posterior),
// 3l+1 (up/down), 3l+2 (femur). Delayed channels 18+2l and 18+2l+1 repeat joints 3l and 3l+1.
namespace hexapod {
inline constexpr int kLegs = 6;
inline constexpr int kJoints = 18;
inline constexpr int kDelayed = 12;
inline constexpr int ap(int leg) { return 3 * leg; }
inline constexpr int ud(int leg) { return 3 * leg + 1; }
inline constexpr int femur(int leg) { return 3 * leg + 2; }
inline constexpr int delayed_ap(int leg) { return kJoints + 2 * leg; }
inline constexpr int delayed_ud(int leg) { return kJoints + 2 * leg + 1; }
std::vector<int> delayed_sources();
std::vector<GuidedEntry> m1_entries();
std::vector<GuidedEntry> m2_entries();
}  // namespace hexapod

// "identity", "hexapod-m1", "hexapod-m2"
MatrixXd model_preset(const std::string& name, int m, int n);

struct DelayedSensorConfig {
  std::vector<int> indices;
  double delay = 0.0;

  int steps(double dt) const;
};

class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(DelayedSensorConfig cfg, int base_size, double dt);

  // Pushes the current base sample and returns base followed by delayed channels.
  // Before the history fills up the delayed channels read zero.
  VectorXd extend(const VectorXd& base);

  int extra() const { return static_cast<int>(cfg_.indices.size()); }
  int steps() const { return steps_; }

 private:
  DelayedSensorConfig cfg_;
  int base_size_ = 0;
  int steps_ = 0;
  std::deque<VectorXd> history_;
};

}  // namespace dep
