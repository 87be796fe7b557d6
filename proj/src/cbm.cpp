#include "cbm/cbm.hpp"

#include "cbm/error.hpp"

namespace cbm {

namespace {

std::string short_name(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::Cosine: return "cos";
    case SimilarityKind::NegEuclidean: return "euclid";
    case SimilarityKind::NegKl: return "kl";
  }
  return "?";
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::AlphaOutOfRange, "alpha " + std::to_string(alpha) + " outside [0, 1]");
}

}  // namespace

CbmConfig::CbmConfig(SimilarityKind sigma_prime, bool apply_softmax, SimilarityKind sigma, double alpha)
    : sigma_prime_(sigma_prime), apply_softmax_(apply_softmax), sigma_(sigma), alpha_(alpha) {
  if (sigma_prime_ == SimilarityKind::NegKl)
    throw Error(ErrorKind::InvalidConfig, "sigma' compares a vector with base columns; KL is not defined there");
  if (sigma_ == SimilarityKind::NegKl && !apply_softmax_)
    throw Error(ErrorKind::InvalidConfig, "sigma = KL requires softmax-normalized distributions");
  check_alpha(alpha_);
}

CbmConfig CbmConfig::defaults() {
  return CbmConfig(SimilarityKind::Cosine, true, SimilarityKind::Cosine, 0.05);
}

CbmConfig CbmConfig::with_alpha(double alpha) const {
  return CbmConfig(sigma_prime_, apply_softmax_, sigma_, alpha);
}

std::string CbmConfig::variant_name() const {
  return short_name(sigma_prime_) + (apply_softmax_ ? "/softmax/" : "/raw/") + short_name(sigma_);
}

std::vector<CbmConfig> all_variants(double alpha) {
  using K = SimilarityKind;
  std::vector<CbmConfig> variants;
  for (const K prime : {K::Cosine, K::NegEuclidean}) {
    for (const K sigma : {K::Cosine, K::NegEuclidean}) variants.emplace_back(prime, false, sigma, alpha);
    for (const K sigma : {K::Cosine, K::NegEuclidean, K::NegKl})
      variants.emplace_back(prime, true, sigma, alpha);
  }
  return variants;
}

SimilarityDistribution similarity_distribution(const VectorRef& v, const Matrix& base,
                                               const CbmConfig& config) {
  if (v.size() != base.rows())
    throw Error(ErrorKind::DimensionMismatch, "vector length " + std::to_string(v.size()) +
                                                  " vs base dimension " + std::to_string(base.rows()));
  if (base.cols() < 2) throw Error(ErrorKind::DimensionMismatch, "base matrix needs at least two columns");
  Vector rho(base.cols());
  for (Eigen::Index i = 0; i < base.cols(); ++i) rho[i] = similarity(config.sigma_prime(), v, base.col(i));
  if (config.apply_softmax()) return {softmax(rho), true};
  return {std::move(rho), false};
}

double transductive_score(const SimilarityDistribution& rho_q, const SimilarityDistribution& rho_s,
                          const CbmConfig& config) {
  if (config.sigma() == SimilarityKind::NegKl && !(rho_q.normalized && rho_s.normalized))
    throw Error(ErrorKind::NotNormalized, "KL between unnormalized distributions");
  return similarity(config.sigma(), rho_q.rho, rho_s.rho);
}

double combined_score(double phi, double varphi, double alpha) {
  check_alpha(alpha);
  return alpha * phi + (1.0 - alpha) * varphi;
}

TransductiveSpace identity_space(const BaseMatrix& base) {
  return {base.matrix(), [](const VectorRef& v) { return Vector(v); }};
}

PathScores path_scores(const Episode& episode, const TransductiveSpace& space,
                       const CbmConfig& config) {
  const Matrix prototypes = episode_prototypes(episode);
  const Eigen::Index n_way = prototypes.cols();

  std::vector<SimilarityDistribution> rho_support;
  rho_support.reserve(static_cast<std::size_t>(n_way));
  for (Eigen::Index n = 0; n < n_way; ++n)
    rho_support.push_back(similarity_distribution(space.map(prototypes.col(n)), space.base, config));

  PathScores scores{Matrix(n_way, episode.query_count()), Matrix(n_way, episode.query_count())};
  for (Eigen::Index j = 0; j < episode.query_count(); ++j) {
    const auto query = episode.queries.col(j);
    scores.phi.col(j) = inductive_scores(query, prototypes);
    const auto rho_query = similarity_distribution(space.map(query), space.base, config);
    for (Eigen::Index n = 0; n < n_way; ++n)
      scores.varphi(n, j) = transductive_score(rho_query, rho_support[static_cast<std::size_t>(n)], config);
  }
  return scores;
}

Matrix combine(const PathScores& scores, double alpha) {
  check_alpha(alpha);
  Matrix psi(scores.phi.rows(), scores.phi.cols());
  for (Eigen::Index j = 0; j < psi.cols(); ++j)
    for (Eigen::Index n = 0; n < psi.rows(); ++n)
      psi(n, j) = alpha * scores.phi(n, j) + (1.0 - alpha) * scores.varphi(n, j);
  return psi;
}

std::vector<int> predictions(const Matrix& psi) {
  std::vector<int> predicted(static_cast<std::size_t>(psi.cols()));
  for (Eigen::Index j = 0; j < psi.cols(); ++j) predicted[static_cast<std::size_t>(j)] = classify(psi.col(j));
  return predicted;
}

Matrix cbm_scores(const Episode& episode, const BaseMatrix& base, const CbmConfig& config) {
  if (episode.dim() != base.dim())
    throw Error(ErrorKind::DimensionMismatch, "episode and base matrix dimensions differ");
  return combine(path_scores(episode, identity_space(base), config), config.alpha());
}

}  // namespace cbm
