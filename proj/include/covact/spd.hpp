#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace covact {

/// Symmetric positive-definite matrix. Construction verifies definiteness
/// through a Cholesky factorization and caches the log-determinant.
class SpdMatrix {
 public:
  /// Throws Error(numerical, "not positive definite") when the
  /// factorization fails and Error(data, ...) on a non-square or
  /// asymmetric input.
  explicit SpdMatrix(Eigen::MatrixXd m);

  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  double log_det() const noexcept { return log_det_; }

  friend bool operator==(const SpdMatrix& a, const SpdMatrix& b) { return a.m_ == b.m_; }

 private:
  Eigen::MatrixXd m_;
  double log_det_ = 0.0;
};

/// log det of a symmetric matrix via its Cholesky factor; empty when the
/// matrix is not positive definite.
std::optional<double> cholesky_log_det(const Eigen::MatrixXd& m);

/// Stein (S-)divergence: ln det((X+Y)/2) - (ln det X + ln det Y) / 2.
double stein_divergence(const SpdMatrix& x, const SpdMatrix& y);

/// x + epsilon I, doubling epsilon (up to ten times) until the result
/// factorizes. Throws Error(numerical, "irreparably singular") otherwise.
SpdMatrix regularize(const Eigen::MatrixXd& x, double epsilon);

/// n x m matrix with orthonormal columns (max |P^T P - I| <= 1e-6).
class ProjectionMatrix {
 public:
  static constexpr double kOrthonormalTolerance = 1e-6;

  explicit ProjectionMatrix(Eigen::MatrixXd p);

  /// First m columns of the n x n identity.
  static ProjectionMatrix identity(Eigen::Index n, Eigen::Index m);

  const Eigen::MatrixXd& matrix() const noexcept { return p_; }
  Eigen::Index rows() const noexcept { return p_.rows(); }
  Eigen::Index cols() const noexcept { return p_.cols(); }

  friend bool operator==(const ProjectionMatrix& a, const ProjectionMatrix& b) {
    return a.p_ == b.p_;
  }

 private:
  Eigen::MatrixXd p_;
};

/// max |P^T P - I|.
double orthonormality_error(const Eigen::MatrixXd& p);

/// Q factor of a thin QR decomposition with the signs fixed so that R has
/// a nonnegative diagonal. Used as the retraction onto orthonormal frames.
Eigen::MatrixXd qr_retract(const Eigen::MatrixXd& y);

/// P^T X P, symmetrized and re-regularized with a 1e-10 shift.
SpdMatrix project(const ProjectionMatrix& p, const SpdMatrix& x);

/// Symmetric matrix with entries in {-1, 0, +1} and zero diagonal. +1 links
/// same-class neighbors, -1 links nearby instances of other classes.
struct AffinityMatrix {
  Eigen::MatrixXd weights;
};

/// k-nearest-neighbor affinity under the Stein divergence. `pairwise` holds
/// the divergences between all training descriptors.
AffinityMatrix build_affinity(std::span<const int> labels, int k_within, int k_between,
                              const Eigen::MatrixXd& pairwise);

/// All pairwise Stein divergences.
Eigen::MatrixXd pairwise_divergences(std::span<const SpdMatrix> descriptors);

/// sum_ij A_ij * stein(P^T X_i P, P^T X_j P). P need not be orthonormal,
/// only of full column rank.
double projection_objective(std::span<const SpdMatrix> descriptors,
                            const AffinityMatrix& affinity, const Eigen::MatrixXd& p);

/// Euclidean gradient of projection_objective with respect to P.
Eigen::MatrixXd projection_gradient(std::span<const SpdMatrix> descriptors,
                                    const AffinityMatrix& affinity,
                                    const Eigen::MatrixXd& p);

/// Central-difference gradient of projection_objective.
Eigen::MatrixXd projection_gradient_numeric(std::span<const SpdMatrix> descriptors,
                                            const AffinityMatrix& affinity,
                                            const Eigen::MatrixXd& p, double step = 1e-5);

enum class GradientMode { analytic, finite_difference };
enum class ProjectionInit { identity, principal, random };

struct ProjectionConfig {
  int k_within = 3;
  int k_between = 3;
  int max_iterations = 200;
  int max_halvings = 20;
  double relative_tolerance = 1e-6;
  GradientMode gradient = GradientMode::analytic;
  ProjectionInit init = ProjectionInit::principal;
  std::uint64_t seed = 0;
};

struct ProjectionIterate {
  double objective = 0.0;
  double orthonormality_error = 0.0;
  double step = 0.0;
};

struct ProjectionResult {
  ProjectionMatrix projection;
  AffinityMatrix affinity;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  /// False when the iteration budget ran out; the best iterate is still returned.
  bool converged = false;
  /// Accepted iterates, starting with the initial point.
  std::vector<ProjectionIterate> trace;
};

/// Learns an orthonormal n x m projection that pulls same-class descriptors
/// together and pushes other-class neighbors apart (Riemannian gradient
/// descent with QR retraction and backtracking line search).
///
/// Throws Error(data, "affinity undefined") with fewer than two classes.
ProjectionResult learn_projection(std::span<const SpdMatrix> descriptors,
                                  std::span<const int> labels, Eigen::Index target_dim,
                                  const ProjectionConfig& config = {});

}  // namespace covact
