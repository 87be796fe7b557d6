#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cbm/embedding_store.hpp"
#include "cbm/inductive.hpp"
#include "cbm/metrics.hpp"

namespace cbm {

/// Variant selector for the bi-path metric. Construction validates:
/// sigma' must be cosine or neg_euclidean, sigma = neg_kl needs softmax, and
/// alpha must lie in [0, 1].
class CbmConfig {
 public:
  CbmConfig(SimilarityKind sigma_prime, bool apply_softmax, SimilarityKind sigma, double alpha);

  /// Cosine / softmax / cosine, alpha = 0.05.
  static CbmConfig defaults();

  SimilarityKind sigma_prime() const noexcept { return sigma_prime_; }
  bool apply_softmax() const noexcept { return apply_softmax_; }
  SimilarityKind sigma() const noexcept { return sigma_; }
  double alpha() const noexcept { return alpha_; }

  CbmConfig with_alpha(double alpha) const;

  /// e.g. "cos/softmax/cos".
  std::string variant_name() const;

  friend bool operator==(const CbmConfig&, const CbmConfig&) = default;

 private:
  SimilarityKind sigma_prime_;
  bool apply_softmax_;
  SimilarityKind sigma_;
  double alpha_;
};

/// The ten sigma' x softmax x sigma combinations, in the order of the
/// published variant table, all at the given alpha.
std::vector<CbmConfig> all_variants(double alpha);

struct SimilarityDistribution {
  Vector rho;
  bool normalized = false;
};

/// rho_i = sigma'(v, b^(i)), softmax-normalized when configured.
SimilarityDistribution similarity_distribution(const VectorRef& v, const Matrix& base,
                                               const CbmConfig& config);

/// sigma(rho_q, rho_s).
double transductive_score(const SimilarityDistribution& rho_q, const SimilarityDistribution& rho_s,
                          const CbmConfig& config);

/// alpha * phi + (1 - alpha) * varphi.
double combined_score(double phi, double varphi, double alpha);

/// Per-query inductive and transductive score vectors of one episode. The
/// combined score for any alpha is formed from these without recomputation.
struct PathScores {
  Matrix phi;     // n_way x queries
  Matrix varphi;  // n_way x queries
};

/// A space in which the transductive path is evaluated: the (possibly reduced)
/// base matrix and the map taking an original-space vector into that space.
struct TransductiveSpace {
  Matrix base;
  std::function<Vector(const VectorRef&)> map;
};

/// Identity space over B.
TransductiveSpace identity_space(const BaseMatrix& base);

PathScores path_scores(const Episode& episode, const TransductiveSpace& space,
                       const CbmConfig& config);

/// psi = alpha * phi + (1 - alpha) * varphi, columnwise.
Matrix combine(const PathScores& scores, double alpha);

/// argmax over psi per query (lowest slot on ties).
std::vector<int> predictions(const Matrix& psi);

/// psi for every query of the episode, n_way x queries.
Matrix cbm_scores(const Episode& episode, const BaseMatrix& base, const CbmConfig& config);

}  // namespace cbm
