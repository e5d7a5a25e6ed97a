#include "covact/spd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "covact/covariance.hpp"
#include "covact/error.hpp"

namespace covact {

namespace {

constexpr double kProjectedShift = 1e-10;

double max_abs_asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

std::optional<double> cholesky_log_det(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) return std::nullopt;
  return 2.0 * diag.array().log().sum();
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) {
    throw data_error("SPD matrix must be square and non-empty");
  }
  if (!m_.allFinite()) throw numerical_error("numerical fault");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if (max_abs_asymmetry(m_) > 1e-8 * scale) throw data_error("matrix is not symmetric");
  symmetrize(m_);
  const auto ld = cholesky_log_det(m_);
  if (!ld) throw numerical_error("not positive definite");
  log_det_ = *ld;
}

double stein_divergence(const SpdMatrix& x, const SpdMatrix& y) {
  if (x.dim() != y.dim()) throw data_error("dimension mismatch");
  const Eigen::MatrixXd mid = 0.5 * (x.matrix() + y.matrix());
  const auto ld_mid = cholesky_log_det(mid);
  if (!ld_mid) throw numerical_error("not positive definite");
  return std::max(0.0, *ld_mid - 0.5 * (x.log_det() + y.log_det()));
}

SpdMatrix regularize(const Eigen::MatrixXd& x, double epsilon) {
  if (x.rows() != x.cols()) throw data_error("regularize expects a square matrix");
  if (!(epsilon > 0.0)) throw usage_error("regularization epsilon must be positive");
  Eigen::MatrixXd sym = x;
  symmetrize(sym);
  for (int attempt = 0; attempt <= 10; ++attempt) {
    Eigen::MatrixXd shifted = sym;
    shifted.diagonal().array() += epsilon;
    if (cholesky_log_det(shifted)) return SpdMatrix(std::move(shifted));
    epsilon *= 2.0;
  }
  throw numerical_error("irreparably singular");
}

double orthonormality_error(const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd gram = p.transpose() * p;
  return (gram - Eigen::MatrixXd::Identity(p.cols(), p.cols())).cwiseAbs().maxCoeff();
}

ProjectionMatrix::ProjectionMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {
  if (p_.cols() < 1 || p_.cols() > p_.rows()) {
    throw data_error("projection must be n x m with 1 <= m <= n");
  }
  if (!p_.allFinite() || orthonormality_error(p_) > kOrthonormalTolerance) {
    throw numerical_error("projection columns are not orthonormal");
  }
}

ProjectionMatrix ProjectionMatrix::identity(Eigen::Index n, Eigen::Index m) {
  return ProjectionMatrix(Eigen::MatrixXd::Identity(n, m));
}

Eigen::MatrixXd qr_retract(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

SpdMatrix project(const ProjectionMatrix& p, const SpdMatrix& x) {
  if (p.rows() != x.dim()) throw data_error("dimension mismatch");
  const Eigen::MatrixXd projected = p.matrix().transpose() * x.matrix() * p.matrix();
  return regularize(projected, kProjectedShift);
}

Eigen::MatrixXd pairwise_divergences(std::span<const SpdMatrix> descriptors) {
  const auto count = static_cast<Eigen::Index>(descriptors.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(count, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = i + 1; j < count; ++j) {
      const double d = stein_divergence(descriptors[static_cast<std::size_t>(i)],
                                        descriptors[static_cast<std::size_t>(j)]);
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

AffinityMatrix build_affinity(std::span<const int> labels, int k_within, int k_between,
                              const Eigen::MatrixXd& pairwise) {
  const auto count = static_cast<Eigen::Index>(labels.size());
  if (count < 2) throw data_error("affinity needs at least two instances");
  if (pairwise.rows() != count || pairwise.cols() != count) {
    throw data_error("pairwise divergence matrix does not match the label count");
  }
  if (k_within < 0 || k_between < 0) throw usage_error("neighbor counts must be nonnegative");

  Eigen::MatrixXd directed = Eigen::MatrixXd::Zero(count, count);
  std::vector<Eigen::Index> same;
  std::vector<Eigen::Index> other;
  for (Eigen::Index i = 0; i < count; ++i) {
    same.clear();
    other.clear();
    for (Eigen::Index j = 0; j < count; ++j) {
      if (j == i) continue;
      (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)] ? same : other)
          .push_back(j);
    }
    auto by_distance = [&](Eigen::Index a, Eigen::Index b) {
      if (pairwise(i, a) != pairwise(i, b)) return pairwise(i, a) < pairwise(i, b);
      return a < b;
    };
    std::sort(same.begin(), same.end(), by_distance);
    std::sort(other.begin(), other.end(), by_distance);
    const auto n_same = std::min<std::size_t>(same.size(), static_cast<std::size_t>(k_within));
    const auto n_other = std::min<std::size_t>(other.size(), static_cast<std::size_t>(k_between));
    for (std::size_t k = 0; k < n_same; ++k) directed(i, same[k]) = 1.0;
    for (std::size_t k = 0; k < n_other; ++k) directed(i, other[k]) = -1.0;
  }

  AffinityMatrix out{Eigen::MatrixXd::Zero(count, count)};
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < count; ++j) {
      const double a = directed(i, j);
      const double b = directed(j, i);
      double v = a;
      if (std::abs(b) > std::abs(a)) {
        v = b;
      } else if (std::abs(a) == std::abs(b) && (a > 0.0 || b > 0.0)) {
        v = std::max(a, b);
      }
      out.weights(i, j) = v;
    }
  }
  return out;
}

namespace {

/// Per-descriptor quantities shared by the objective and its gradient.
struct ProjectedSet {
  std::vector<Eigen::MatrixXd> projected;  // P^T X_i P
  std::vector<double> log_dets;
};

ProjectedSet project_all(std::span<const SpdMatrix> descriptors, const Eigen::MatrixXd& p) {
  ProjectedSet set;
  set.projected.reserve(descriptors.size());
  set.log_dets.reserve(descriptors.size());
  for (const auto& x : descriptors) {
    if (x.dim() != p.rows()) throw data_error("dimension mismatch");
    Eigen::MatrixXd y = p.transpose() * x.matrix() * p;
    symmetrize(y);
    const auto ld = cholesky_log_det(y);
    if (!ld) throw numerical_error("not positive definite");
    set.projected.push_back(std::move(y));
    set.log_dets.push_back(*ld);
  }
  return set;
}

void check_affinity(std::span<const SpdMatrix> descriptors, const AffinityMatrix& affinity) {
  const auto count = static_cast<Eigen::Index>(descriptors.size());
  if (affinity.weights.rows() != count || affinity.weights.cols() != count) {
    throw data_error("affinity does not match the descriptor count");
  }
}

}  // namespace

double projection_objective(std::span<const SpdMatrix> descriptors,
                            const AffinityMatrix& affinity, const Eigen::MatrixXd& p) {
  check_affinity(descriptors, affinity);
  const ProjectedSet set = project_all(descriptors, p);
  const auto count = static_cast<Eigen::Index>(descriptors.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < count; ++j) {
      const double a = affinity.weights(i, j);
      if (a == 0.0 || i == j) continue;
      const auto si = static_cast<std::size_t>(i);
      const auto sj = static_cast<std::size_t>(j);
      const auto ld_mid = cholesky_log_det(0.5 * (set.projected[si] + set.projected[sj]));
      if (!ld_mid) throw numerical_error("not positive definite");
      total += a * (*ld_mid - 0.5 * (set.log_dets[si] + set.log_dets[sj]));
    }
  }
  return total;
}

Eigen::MatrixXd projection_gradient(std::span<const SpdMatrix> descriptors,
                                    const AffinityMatrix& affinity,
                                    const Eigen::MatrixXd& p) {
  // d/dP ln det(P^T X P) = 2 X P (P^T X P)^{-1} for symmetric X.
  check_affinity(descriptors, affinity);
  const ProjectedSet set = project_all(descriptors, p);
  const std::size_t count = descriptors.size();

  std::vector<Eigen::MatrixXd> xp(count);     // X_i P
  std::vector<Eigen::MatrixXd> whiten(count);  // X_i P (P^T X_i P)^{-1}
  for (std::size_t i = 0; i < count; ++i) {
    xp[i] = descriptors[i].matrix() * p;
    Eigen::LLT<Eigen::MatrixXd> llt(set.projected[i]);
    whiten[i] = llt.solve(xp[i].transpose()).transpose();
  }

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < count; ++j) {
      const double a = affinity.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (a == 0.0 || i == j) continue;
      Eigen::LLT<Eigen::MatrixXd> mid(0.5 * (set.projected[i] + set.projected[j]));
      if (mid.info() != Eigen::Success) throw numerical_error("not positive definite");
      const Eigen::MatrixXd pulled = mid.solve((xp[i] + xp[j]).transpose()).transpose();
      grad += a * (pulled - whiten[i] - whiten[j]);
    }
  }
  return grad;
}

Eigen::MatrixXd projection_gradient_numeric(std::span<const SpdMatrix> descriptors,
                                            const AffinityMatrix& affinity,
                                            const Eigen::MatrixXd& p, double step) {
  Eigen::MatrixXd grad(p.rows(), p.cols());
  Eigen::MatrixXd probe = p;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      probe(r, c) = p(r, c) + step;
      const double up = projection_objective(descriptors, affinity, probe);
      probe(r, c) = p(r, c) - step;
      const double down = projection_objective(descriptors, affinity, probe);
      probe(r, c) = p(r, c);
      grad(r, c) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

ProjectionResult learn_projection(std::span<const SpdMatrix> descriptors,
                                  std::span<const int> labels, Eigen::Index target_dim,
                                  const ProjectionConfig& config) {
  if (descriptors.size() != labels.size()) {
    throw data_error("descriptor and label counts differ");
  }
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw data_error("affinity undefined");
  }
  const Eigen::Index n = descriptors.front().dim();
  for (const auto& x : descriptors) {
    if (x.dim() != n) throw data_error("descriptor dimensions differ");
  }
  if (target_dim < 1 || target_dim > n) {
    throw usage_error("target dimension must lie in [1, " + std::to_string(n) + "]");
  }

  const AffinityMatrix affinity =
      build_affinity(labels, config.k_within, config.k_between, pairwise_divergences(descriptors));

  Eigen::MatrixXd p;
  if (config.init == ProjectionInit::random) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(n, target_dim);
    for (Eigen::Index c = 0; c < target_dim; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) g(r, c) = normal(rng);
    }
    p = qr_retract(g);
  } else if (config.init == ProjectionInit::principal) {
    // Leading eigenvectors of the mean descriptor.
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
    for (const auto& x : descriptors) mean += x.matrix();
    mean /= static_cast<double>(descriptors.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mean);
    p = eig.eigenvectors().rightCols(target_dim).rowwise().reverse();
  } else {
    p = Eigen::MatrixXd::Identity(n, target_dim);
  }

  auto objective = [&](const Eigen::MatrixXd& q) {
    try {
      return projection_objective(descriptors, affinity, q);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto gradient = [&](const Eigen::MatrixXd& q) {
    return config.gradient == GradientMode::finite_difference
               ? projection_gradient_numeric(descriptors, affinity, q)
               : projection_gradient(descriptors, affinity, q);
  };

  double current = projection_objective(descriptors, affinity, p);
  ProjectionResult result{ProjectionMatrix(p), affinity, current, current, 0, false, {}};
  result.trace.push_back({current, orthonormality_error(p), 0.0});

  constexpr double kArmijo = 1e-4;
  double step = 0.0;
  for (int it = 0; it < config.max_iterations; ++it) {
    const Eigen::MatrixXd euclidean = gradient(p);
    const Eigen::MatrixXd inner = p.transpose() * euclidean;
    const Eigen::MatrixXd riemannian = euclidean - p * (0.5 * (inner + inner.transpose()));
    const double slope = riemannian.squaredNorm();
    if (!(slope > 0.0) || !std::isfinite(slope)) {
      result.converged = std::isfinite(slope);
      break;
    }
    // A unit-length move is the largest trial step; after the first
    // iteration the trial is twice the last accepted step.
    const double unit = 1.0 / std::sqrt(slope);
    step = step == 0.0 ? unit : std::min(2.0 * step, unit);

    bool accepted = false;
    Eigen::MatrixXd candidate;
    double candidate_value = current;
    for (int h = 0; h <= config.max_halvings; ++h) {
      candidate = qr_retract(p - step * riemannian);
      candidate_value = objective(candidate);
      if (candidate_value <= current - kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at line-search resolution.
      result.converged = true;
      break;
    }

    const double decrease = current - candidate_value;
    const double relative = decrease / std::max(std::abs(current), 1e-300);
    p = std::move(candidate);
    current = candidate_value;
    ++result.iterations;
    result.trace.push_back({current, orthonormality_error(p), step});
    if (relative < config.relative_tolerance) {
      result.converged = true;
      break;
    }
  }

  result.projection = ProjectionMatrix(std::move(p));
  result.final_objective = current;
  return result;
}

}  // namespace covact
