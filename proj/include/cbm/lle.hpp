#pragma once

#include <optional>
#include <vector>

#include "cbm/cbm.hpp"
#include "cbm/embedding_store.hpp"
#include "cbm/metrics.hpp"

namespace cbm {

struct LleConfig {
  int k = 10;
  int c_prime = 63;
  bool l2_normalize = false;
  double reg = 1e-3;

  /// Throws InvalidConfig unless 1 <= k < n_base, 1 <= c_prime <= n_base - 1
  /// and reg >= 0.
  void validate(Eigen::Index n_base) const;
};

/// Indices of the k columns of `base` closest to x in Euclidean distance,
/// ascending by distance, ties to the lower index. `exclude` removes one
/// column from candidacy.
std::vector<Eigen::Index> knn(const Matrix& base, const VectorRef& x, int k,
                              std::optional<Eigen::Index> exclude = std::nullopt);

/// Reconstruction weights of x from its neighbours (columns), summing to one:
/// w = C^-1 1 / (1' C^-1 1) with C = (X - N)'(X - N) shifted by
/// reg * trace(C) / k on the diagonal (reg * 1 when the trace vanishes).
Vector local_weights(const VectorRef& x, const Matrix& neighbors, double reg);

/// Fitted embedding of the base matrix.
struct LleModel {
  LleConfig config;
  Matrix base;      // c x n, L2-normalized columns when configured
  Matrix weights;   // n x n, column i holds the weights reconstructing b^(i)
  Matrix cost;      // M = (I - W)(I - W)'
  Matrix reduced;   // c' x n
  Vector eigenvalues;  // the c' retained eigenvalues, ascending
  std::vector<std::vector<Eigen::Index>> neighbors;  // per base column

  /// Out-of-sample extension of an original-space vector.
  Vector transform(const VectorRef& x) const;
};

LleModel fit_lle(const BaseMatrix& base, const LleConfig& config);

/// Reduced transductive space backed by a fitted model.
TransductiveSpace lle_space(const LleModel& model);

/// psi~ for every query: transductive path through the reduced space, the
/// inductive path on the original vectors.
Matrix cbm_lle_scores(const Episode& episode, const LleModel& model, const CbmConfig& config);
Matrix cbm_lle_scores(const Episode& episode, const BaseMatrix& base, const LleConfig& lle_config,
                      const CbmConfig& cbm_config);

}  // namespace cbm
