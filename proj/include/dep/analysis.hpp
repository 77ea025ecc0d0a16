#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dep {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kNonzeroEigen = 1e-6;

struct SpectrumSample {
  double time = 0.0;
  VectorXcd eigenvalues;             // descending modulus, ties by real then imaginary part
  std::vector<VectorXcd> vectors;    // leading eigenvectors, at most three
};

// R = M C; with delayed channels (n > m) the square block on the first m columns is used
MatrixXd loop_matrix(const MatrixXd& M, const MatrixXd& C);

SpectrumSample spectrum(const MatrixXd& M, const MatrixXd& C, double time = 0.0);
SpectrumSample spectrum_of(const MatrixXd& R, double time = 0.0);

int count_above(const SpectrumSample& s, double fraction_of_max);
inline int nonzero_count(const SpectrumSample& s) { return count_above(s, kNonzeroEigen); }

// angle between the complex lines spanned by u and v
double principal_angle(const VectorXcd& u, const VectorXcd& v);

// |x - alpha C x| + | |x|^2 - 1/alpha |
double hebb_residual(const MatrixXd& C, const VectorXd& x, double alpha);

struct RotationDefect {
  bool defined = false;
  int period = 0;               // samples
  double identity_defect = 0;   // |S - tr(S)/n I| / |S|, S = <x' x'^T> over the last period
  double rotation_defect = 0;   // |C - M(aI + bJ)| / |C| for the best a, b (2-D only, else NaN)
};

// rows of x_dot are samples
RotationDefect rotation_consistency(const MatrixXd& x_dot, const MatrixXd& C, const MatrixXd& M);
int detect_period(const VectorXd& signal, int min_lag = 2);

double wrap_angle(double a);

struct PhaseMatrix {
  MatrixXd phase;                                  // phase[i][j]: j relative to i, (-pi, pi]
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
  double frequency = 0.0;                          // Hz
};

// columns of signals are channels, rows are samples at spacing dt
PhaseMatrix phase_relations(const MatrixXd& signals, double dt);
double dominant_frequency(const VectorXd& signal, double dt);
// largest wrapped entry difference over entries defined in both
double phase_distance(const PhaseMatrix& a, const PhaseMatrix& b);

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

struct StepPattern {
  std::vector<std::vector<Interval>> down;  // per leg
  std::string gait;                         // "tripod", "wave" or empty
};

// rows of contacts are samples, columns legs
StepPattern extract_step_pattern(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& contacts,
                                 double dt);
std::string label_gait(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& contacts, double dt);

struct Clustering {
  std::vector<MatrixXd> centers;
  std::vector<int> assignment;
};

inline constexpr std::uint64_t kClusterSeed = 0x5eed5eedULL;

Clustering cluster_weights(const std::vector<MatrixXd>& snapshots, int k,
                           std::uint64_t seed = kClusterSeed);

// mean over columns of the per-column variance
double activity_variance(const MatrixXd& samples);

}  // namespace dep
