#include "cbm/inductive.hpp"

#include "cbm/error.hpp"

namespace cbm {

Vector class_prototype(const Matrix& support_vectors) {
  if (support_vectors.cols() == 0) throw Error(ErrorKind::EmptySupport, "class has no support vectors");
  return support_vectors.rowwise().sum() / static_cast<double>(support_vectors.cols());
}

Matrix episode_prototypes(const Episode& episode) {
  if (episode.support.empty()) throw Error(ErrorKind::EmptySupport, "episode has no classes");
  Matrix prototypes(episode.support.front().rows(), static_cast<Eigen::Index>(episode.support.size()));
  for (std::size_t n = 0; n < episode.support.size(); ++n)
    prototypes.col(static_cast<Eigen::Index>(n)) = class_prototype(episode.support[n]);
  return prototypes;
}

Vector inductive_scores(const VectorRef& query, const Matrix& prototypes) {
  Vector phi(prototypes.cols());
  for (Eigen::Index n = 0; n < prototypes.cols(); ++n) phi[n] = cosine(query, prototypes.col(n));
  return phi;
}

int classify(const VectorRef& scores) {
  if (scores.size() == 0) throw Error(ErrorKind::EmptyScores, "no scores to classify");
  if (!scores.allFinite()) throw Error(ErrorKind::NonFinite, "scores contain non-finite values");
  Eigen::Index best = 0;
  for (Eigen::Index n = 1; n < scores.size(); ++n)
    if (scores[n] > scores[best]) best = n;
  return static_cast<int>(best);
}

std::vector<int> inductive_predictions(const Episode& episode) {
  const Matrix prototypes = episode_prototypes(episode);
  std::vector<int> predicted(static_cast<std::size_t>(episode.query_count()));
  for (Eigen::Index j = 0; j < episode.query_count(); ++j)
    predicted[static_cast<std::size_t>(j)] = classify(inductive_scores(episode.queries.col(j), prototypes));
  return predicted;
}

}  // namespace cbm
