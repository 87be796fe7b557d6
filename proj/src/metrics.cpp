#include "cbm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cbm/error.hpp"

namespace cbm {

namespace {

void require_same_length(const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::LengthMismatch,
                "lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

}  // namespace

double cosine(const VectorRef& a, const VectorRef& b) {
  require_same_length(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
  // Rounding can push |a.b| / (|a||b|) a few ulps past 1.
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double neg_euclidean(const VectorRef& a, const VectorRef& b) {
  require_same_length(a, b);
  return -(a - b).norm();
}

Vector softmax(const VectorRef& v) {
  if (v.size() == 0) return Vector();
  if (!v.allFinite()) throw Error(ErrorKind::NonFinite, "softmax input has non-finite entries");
  Vector e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

bool is_probability_vector(const VectorRef& p, double tol) {
  return p.size() > 0 && p.allFinite() && (p.array() >= 0.0).all() && std::abs(p.sum() - 1.0) <= tol;
}

double neg_kl(const VectorRef& p, const VectorRef& q) {
  require_same_length(p, q);
  if (!is_probability_vector(p) || !is_probability_vector(q))
    throw Error(ErrorKind::NotNormalized, "KL needs softmax-normalized distributions");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = std::max(p[i], kKlFloor);
    const double qi = std::max(q[i], kKlFloor);
    kl += pi * std::log(pi / qi);
  }
  return -kl;
}

double similarity(SimilarityKind kind, const VectorRef& a, const VectorRef& b) {
  switch (kind) {
    case SimilarityKind::Cosine: return cosine(a, b);
    case SimilarityKind::NegEuclidean: return neg_euclidean(a, b);
    case SimilarityKind::NegKl: return neg_kl(a, b);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown similarity kind");
}

double dense_classification_loss(const LossInputs& in) {
  const Eigen::Index c = in.features.channels();
  const Eigen::Index n_classes = in.weights.cols();
  if (in.weights.rows() != c || in.bias.size() != n_classes)
    throw Error(ErrorKind::DimensionMismatch, "loss weights, bias and features are not conformable");
  if (in.target < 0 || in.target >= n_classes)
    throw Error(ErrorKind::DimensionMismatch, "target class out of range");
  if (!(in.temperature > 0.0) || !std::isfinite(in.temperature))
    throw Error(ErrorKind::InvalidConfig, "temperature must be positive");

  // r x |C| logits, one row per spatial position.
  const Matrix logits =
      (in.temperature * ((in.features.data().transpose() * in.weights).rowwise() +
                         in.bias.transpose())).eval();
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    const double log_sum = peak + std::log((logits.row(i).array() - peak).exp().sum());
    total += log_sum - logits(i, in.target);
  }
  return total / static_cast<double>(logits.rows());
}

}  // namespace cbm
