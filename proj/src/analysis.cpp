#include "dep/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

#include "dep/controller.hpp"

namespace dep {

using cd = std::complex<double>;

MatrixXd loop_matrix(const MatrixXd& M, const MatrixXd& C) {
  if (M.rows() != C.rows() || M.cols() != C.cols()) throw DimensionError("model and weights differ in shape");
  const auto m = C.rows();
  if (C.cols() < m) throw DimensionError("loop matrix needs at least as many sensors as motors");
  return M.leftCols(m) * C.leftCols(m);
}

SpectrumSample spectrum(const MatrixXd& M, const MatrixXd& C, double time) {
  if (!M.allFinite() || !C.allFinite()) throw std::invalid_argument("non-finite matrix in spectrum");
  return spectrum_of(loop_matrix(M, C), time);
}

SpectrumSample spectrum_of(const MatrixXd& R, double time) {
  if (R.rows() != R.cols()) throw DimensionError("spectrum needs a square matrix");
  if (!R.allFinite()) throw std::invalid_argument("non-finite matrix in spectrum");
  Eigen::EigenSolver<MatrixXd> es(R, true);
  const VectorXcd ev = es.eigenvalues();
  std::vector<int> order(ev.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(ev(a)), mb = std::abs(ev(b));
    if (ma != mb) return ma > mb;
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  SpectrumSample s;
  s.time = time;
  s.eigenvalues.resize(ev.size());
  for (int i = 0; i < ev.size(); ++i) s.eigenvalues(i) = ev(order[i]);
  for (int i = 0; i < std::min<int>(3, ev.size()); ++i) s.vectors.push_back(es.eigenvectors().col(order[i]));
  return s;
}

int count_above(const SpectrumSample& s, double fraction_of_max) {
  if (s.eigenvalues.size() == 0) return 0;
  const double top = std::abs(s.eigenvalues(0));
  if (top == 0.0) return 0;
  int n = 0;
  for (int i = 0; i < s.eigenvalues.size(); ++i) n += std::abs(s.eigenvalues(i)) > fraction_of_max * top;
  return n;
}

double principal_angle(const VectorXcd& u, const VectorXcd& v) {
  if (u.size() != v.size()) throw DimensionError("eigenvectors differ in length");
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0 || nv == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::acos(std::min(1.0, std::abs(u.dot(v)) / (nu * nv)));
}

double hebb_residual(const MatrixXd& C, const VectorXd& x, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
  if (C.cols() != x.size() || C.rows() != x.size()) throw DimensionError("Hebb state needs square C");
  return (x - alpha * C * x).norm() + std::abs(x.squaredNorm() - 1.0 / alpha);
}

int detect_period(const VectorXd& signal, int min_lag) {
  const VectorXd s = signal.array() - signal.mean();
  const auto n = s.size();
  const double r0 = s.squaredNorm() / n;
  if (!(r0 > 0)) return 0;
  auto ac = [&](Eigen::Index lag) { return s.head(n - lag).dot(s.tail(n - lag)) / ((n - lag) * r0); };
  Eigen::Index lag = std::max(1, min_lag);
  while (lag < n / 2 && ac(lag) > 0) ++lag;  // past the first zero crossing
  for (++lag; lag + 1 < n / 2; ++lag) {
    const double v = ac(lag);
    if (v > 0 && v >= ac(lag - 1) && v >= ac(lag + 1)) return static_cast<int>(lag);
  }
  return 0;
}

RotationDefect rotation_consistency(const MatrixXd& x_dot, const MatrixXd& C, const MatrixXd& M) {
  RotationDefect out;
  const auto n = x_dot.cols();
  if (x_dot.rows() < 4 || n < 1) return out;
  out.period = detect_period(x_dot.col(0));
  if (out.period == 0) return out;
  const MatrixXd w = x_dot.bottomRows(out.period);
  const MatrixXd S = w.transpose() * w / static_cast<double>(out.period);
  if (S.norm() == 0) return out;
  out.defined = true;
  out.identity_defect = (S - S.trace() / n * MatrixXd::Identity(n, n)).norm() / S.norm();
  out.rotation_defect = std::numeric_limits<double>::quiet_NaN();
  if (C.rows() == 2 && C.cols() == 2 && M.rows() == 2 && M.cols() == 2 && C.norm() > 0) {
    MatrixXd Jr(2, 2);
    Jr << 0, -1, 1, 0;
    const MatrixXd A = M, B = M * Jr;
    Eigen::Matrix<double, 4, 2> G;
    G.col(0) = A.reshaped();
    G.col(1) = B.reshaped();
    const Eigen::Vector2d ab = G.colPivHouseholderQr().solve(C.reshaped());
    out.rotation_defect = (C - ab(0) * A - ab(1) * B).norm() / C.norm();
  }
  return out;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0) a += two_pi;
  return a - std::numbers::pi;
}

namespace {

std::vector<cd> windowed_spectrum(const VectorXd& signal) {
  const auto n = signal.size();
  const double mean = signal.mean();
  std::vector<double> in(n);
  for (Eigen::Index i = 0; i < n; ++i)
    in[i] = (signal(i) - mean) * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
  std::vector<cd> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  out.resize(n / 2 + 1);
  return out;
}

int peak_bin(const std::vector<double>& mag) {
  int best = 1;
  for (int k = 2; k < static_cast<int>(mag.size()); ++k)
    if (mag[k] > mag[best]) best = k;
  return best;
}

}  // namespace

double dominant_frequency(const VectorXd& signal, double dt) {
  if (signal.size() < 4) return 0.0;
  auto F = windowed_spectrum(signal);
  std::vector<double> mag(F.size());
  for (std::size_t k = 0; k < F.size(); ++k) mag[k] = std::abs(F[k]);
  return peak_bin(mag) / (signal.size() * dt);
}

PhaseMatrix phase_relations(const MatrixXd& signals, double dt) {
  const auto n = signals.rows();
  const auto k = signals.cols();
  PhaseMatrix pm;
  pm.phase = MatrixXd::Zero(k, k);
  pm.defined.setConstant(k, k, false);
  if (n < 4 || k == 0) return pm;
  std::vector<std::vector<cd>> F(k);
  std::vector<double> total(n / 2 + 1, 0.0);
  std::vector<double> own_max(k, 0.0);
  for (Eigen::Index c = 0; c < k; ++c) {
    F[c] = windowed_spectrum(signals.col(c));
    for (std::size_t b = 1; b < F[c].size(); ++b) {
      total[b] += std::abs(F[c][b]);
      own_max[c] = std::max(own_max[c], std::abs(F[c][b]));
    }
  }
  const int bin = peak_bin(total);
  pm.frequency = bin / (n * dt);
  std::vector<bool> ok(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    // oscillating at the common frequency, not merely leaking into it
    const double var = (signals.col(c).array() - signals.col(c).mean()).square().mean();
    ok[c] = var > 1e-12 && std::abs(F[c][bin]) > 0.1 * own_max[c];
  }
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!ok[i] || !ok[j]) continue;
      pm.defined(i, j) = true;
      pm.phase(i, j) = i == j ? 0.0 : wrap_angle(std::arg(F[j][bin] * std::conj(F[i][bin])));
    }
  return pm;
}

double phase_distance(const PhaseMatrix& a, const PhaseMatrix& b) {
  if (a.phase.rows() != b.phase.rows() || a.phase.cols() != b.phase.cols())
    throw DimensionError("phase matrices differ in shape");
  double d = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < a.phase.rows(); ++i)
    for (Eigen::Index j = 0; j < a.phase.cols(); ++j)
      if (a.defined(i, j) && b.defined(i, j)) {
        any = true;
        d = std::max(d, std::abs(wrap_angle(a.phase(i, j) - b.phase(i, j))));
      }
  return any ? d : std::numeric_limits<double>::quiet_NaN();
}

StepPattern extract_step_pattern(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& contacts,
                                 double dt) {
  StepPattern sp;
  sp.down.resize(contacts.cols());
  for (Eigen::Index leg = 0; leg < contacts.cols(); ++leg) {
    Eigen::Index start = -1;
    for (Eigen::Index t = 0; t < contacts.rows(); ++t) {
      if (contacts(t, leg) && start < 0) start = t;
      if (!contacts(t, leg) && start >= 0) {
        sp.down[leg].push_back({start * dt, t * dt});
        start = -1;
      }
    }
    if (start >= 0) sp.down[leg].push_back({start * dt, contacts.rows() * dt});
  }
  sp.gait = label_gait(contacts, dt);
  return sp;
}

std::string label_gait(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& contacts, double dt) {
  if (contacts.cols() != 6 || contacts.rows() < 8) return "";
  const MatrixXd s = contacts.cast<double>().array() * 2.0 - 1.0;
  const PhaseMatrix pm = phase_relations(s, dt);
  if (!pm.defined.all()) return "";
  constexpr double tol = 0.5;
  auto near = [](double a, double b) { return std::abs(wrap_angle(a - b)) < tol; };
  const double third = 2.0 * std::numbers::pi / 3.0;
  int tri[2] = {0, 0}, wave[3] = {0, 0, 0};
  for (int leg = 0; leg < 6; ++leg) {
    const double p = pm.phase(0, leg);
    if (near(p, 0)) ++tri[0];
    else if (near(p, std::numbers::pi)) ++tri[1];
    if (near(p, 0)) ++wave[0];
    else if (near(p, third)) ++wave[1];
    else if (near(p, -third)) ++wave[2];
  }
  if (tri[0] == 3 && tri[1] == 3) return "tripod";
  if (wave[0] == 2 && wave[1] == 2 && wave[2] == 2) return "wave";
  return "";
}

Clustering cluster_weights(const std::vector<MatrixXd>& snapshots, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (static_cast<std::size_t>(k) > snapshots.size()) throw std::invalid_argument("k exceeds snapshot count");
  const auto rows = snapshots.front().rows(), cols = snapshots.front().cols();
  const auto N = static_cast<int>(snapshots.size());
  MatrixXd X(rows * cols, N);
  for (int i = 0; i < N; ++i) {
    if (snapshots[i].rows() != rows || snapshots[i].cols() != cols) throw DimensionError("snapshots differ in shape");
    X.col(i) = snapshots[i].reshaped();
  }

  std::mt19937_64 rng(seed);
  std::vector<int> chosen{static_cast<int>(rng() % N)};
  VectorXd d2(N);
  while (static_cast<int>(chosen.size()) < k) {
    for (int i = 0; i < N; ++i) {
      d2(i) = std::numeric_limits<double>::infinity();
      for (int c : chosen) d2(i) = std::min(d2(i), (X.col(i) - X.col(c)).squaredNorm());
    }
    const double total = d2.sum();
    int pick = 0;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      while (pick < N - 1 && r >= d2(pick)) r -= d2(pick++);
    } else {
      pick = static_cast<int>(rng() % N);
    }
    chosen.push_back(pick);
  }
  MatrixXd centers(X.rows(), k);
  for (int c = 0; c < k; ++c) centers.col(c) = X.col(chosen[c]);

  std::vector<int> assign(N, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      Eigen::Index best;
      (centers.colwise() - X.col(i)).colwise().squaredNorm().minCoeff(&best);
      if (assign[i] != best) {
        assign[i] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      VectorXd sum = VectorXd::Zero(X.rows());
      int count = 0;
      for (int i = 0; i < N; ++i)
        if (assign[i] == c) {
          sum += X.col(i);
          ++count;
        }
      if (count) centers.col(c) = sum / count;
    }
  }

  Clustering out;
  out.assignment = assign;
  for (int c = 0; c < k; ++c) out.centers.push_back(centers.col(c).reshaped(rows, cols));
  return out;
}

double activity_variance(const MatrixXd& samples) {
  if (samples.rows() == 0) return 0.0;
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  return (samples.rowwise() - mean).array().square().colwise().mean().mean();
}

}  // namespace dep
