#pragma once

#include <cstdint>
#include <vector>

#include "cbm/metrics.hpp"
#include "cbm/types.hpp"

namespace cbm {

/// One N-way K-shot task. Support vectors of slot n are the columns of
/// `support[n]`; queries are the columns of `queries` with their true slot in
/// `query_slots`.
struct Episode {
  int n_way = 0;
  int k_shot = 0;
  int n_query = 0;
  std::vector<std::uint32_t> class_ids;
  std::vector<Matrix> support;
  Matrix queries;
  std::vector<int> query_slots;

  Eigen::Index dim() const noexcept { return queries.rows(); }
  Eigen::Index query_count() const noexcept { return queries.cols(); }
};

/// Mean of the support vectors (columns).
Vector class_prototype(const Matrix& support_vectors);

/// Prototypes for every slot, one per column.
Matrix episode_prototypes(const Episode& episode);

/// phi^(n) = cos(q, s^(n)) for each prototype column.
Vector inductive_scores(const VectorRef& query, const Matrix& prototypes);

/// Index of the maximum score; ties go to the lowest index.
int classify(const VectorRef& scores);

/// Predicted slot for each query of the episode under the baseline rule.
std::vector<int> inductive_predictions(const Episode& episode);

}  // namespace cbm
