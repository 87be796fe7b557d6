#include "cbm/lle.hpp"

#include <algorithm>
#include <numeric>

#include "cbm/error.hpp"

namespace cbm {

namespace {

constexpr double kTraceFloor = 1e-12;

Vector normalized(const VectorRef& v) {
  const double norm = v.norm();
  if (norm == 0.0) throw Error(ErrorKind::ZeroVector, "cannot L2-normalize a zero vector");
  return v / norm;
}

}  // namespace

void LleConfig::validate(Eigen::Index n_base) const {
  if (k < 1 || k >= n_base)
    throw Error(ErrorKind::InvalidConfig, "LLE k=" + std::to_string(k) + " must satisfy 1 <= k < " +
                                              std::to_string(n_base));
  if (c_prime < 1 || c_prime > n_base - 1)
    throw Error(ErrorKind::InvalidConfig, "LLE c'=" + std::to_string(c_prime) +
                                              " must satisfy 1 <= c' <= " + std::to_string(n_base - 1));
  if (!(reg >= 0.0)) throw Error(ErrorKind::InvalidConfig, "LLE regularization must be nonnegative");
}

std::vector<Eigen::Index> knn(const Matrix& base, const VectorRef& x, int k,
                              std::optional<Eigen::Index> exclude) {
  if (x.size() != base.rows())
    throw Error(ErrorKind::DimensionMismatch, "query length differs from base dimension");
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
  const Eigen::Index eligible = base.cols() - (exclude && *exclude >= 0 && *exclude < base.cols() ? 1 : 0);
  if (k > eligible)
    throw Error(ErrorKind::KTooLarge,
                "k=" + std::to_string(k) + " exceeds " + std::to_string(eligible) + " candidate columns");

  const Vector dist2 = (base.colwise() - x).colwise().squaredNorm().transpose();
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(base.cols()));
  for (Eigen::Index i = 0; i < base.cols(); ++i)
    if (!exclude || *exclude != i) order.push_back(i);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dist2[a] < dist2[b] || (dist2[a] == dist2[b] && a < b);
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

Vector local_weights(const VectorRef& x, const Matrix& neighbors, double reg) {
  if (neighbors.rows() != x.size())
    throw Error(ErrorKind::DimensionMismatch, "neighbour and query lengths differ");
  const Eigen::Index k = neighbors.cols();
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "need at least one neighbour");

  const Matrix diff = neighbors.colwise() - x;
  Matrix cov = diff.transpose() * diff;
  const double trace = cov.trace();
  const double shift = reg * (trace > kTraceFloor ? trace / static_cast<double>(k) : 1.0);
  cov.diagonal().array() += shift;

  const Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::SingularSystem, "local covariance is not positive definite; increase reg");
  const Vector z = llt.solve(Vector::Ones(k));
  const double total = z.sum();
  if (!z.allFinite() || total == 0.0 || !std::isfinite(total))
    throw Error(ErrorKind::SingularSystem, "local weight system has no normalizable solution");
  return z / total;
}

Vector LleModel::transform(const VectorRef& x) const {
  const Vector input = config.l2_normalize ? normalized(x) : Vector(x);
  const auto idx = knn(base, input, config.k);
  Matrix neighbors(base.rows(), config.k);
  for (int j = 0; j < config.k; ++j) neighbors.col(j) = base.col(idx[static_cast<std::size_t>(j)]);
  const Vector w = local_weights(input, neighbors, config.reg);
  Vector out = Vector::Zero(reduced.rows());
  for (int j = 0; j < config.k; ++j) out += w[j] * reduced.col(idx[static_cast<std::size_t>(j)]);
  return out;
}

LleModel fit_lle(const BaseMatrix& base_matrix, const LleConfig& config) {
  const Eigen::Index n = base_matrix.size();
  config.validate(n);

  LleModel model;
  model.config = config;
  model.base = base_matrix.matrix();
  if (config.l2_normalize)
    for (Eigen::Index i = 0; i < n; ++i) model.base.col(i) = normalized(model.base.col(i));

  model.weights = Matrix::Zero(n, n);
  model.neighbors.resize(static_cast<std::size_t>(n));
  Matrix neighbors(model.base.rows(), config.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto idx = knn(model.base, model.base.col(i), config.k, i);
    for (int j = 0; j < config.k; ++j) neighbors.col(j) = model.base.col(idx[static_cast<std::size_t>(j)]);
    const Vector w = local_weights(model.base.col(i), neighbors, config.reg);
    for (int j = 0; j < config.k; ++j) model.weights(idx[static_cast<std::size_t>(j)], i) = w[j];
    model.neighbors[static_cast<std::size_t>(i)] = std::move(idx);
  }

  const Matrix residual = Matrix::Identity(n, n) - model.weights;
  const Matrix product = residual * residual.transpose();
  model.cost = (product + product.transpose()) * 0.5;

  const Eigen::SelfAdjointEigenSolver<Matrix> solver(model.cost);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::EigenFailure, "symmetric eigensolver did not converge");

  // Skip the smallest eigenpair (the constant vector); keep the next c'.
  model.reduced.resize(config.c_prime, n);
  model.eigenvalues = solver.eigenvalues().segment(1, config.c_prime);
  for (int r = 0; r < config.c_prime; ++r) {
    Vector v = solver.eigenvectors().col(r + 1);
    v.normalize();
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v[largest] < 0.0) v = -v;
    model.reduced.row(r) = v.transpose();
  }
  return model;
}

TransductiveSpace lle_space(const LleModel& model) {
  return {model.reduced, [&model](const VectorRef& v) { return model.transform(v); }};
}

Matrix cbm_lle_scores(const Episode& episode, const LleModel& model, const CbmConfig& config) {
  if (episode.dim() != model.base.rows())
    throw Error(ErrorKind::DimensionMismatch, "episode and LLE model dimensions differ");
  return combine(path_scores(episode, lle_space(model), config), config.alpha());
}

Matrix cbm_lle_scores(const Episode& episode, const BaseMatrix& base, const LleConfig& lle_config,
                      const CbmConfig& cbm_config) {
  return cbm_lle_scores(episode, fit_lle(base, lle_config), cbm_config);
}

}  // namespace cbm
