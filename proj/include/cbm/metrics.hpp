#pragma once

#include "cbm/embedding_store.hpp"
#include "cbm/types.hpp"

namespace cbm {

using VectorRef = Eigen::Ref<const Vector>;

/// Kernels usable as sigma' (vector vs. base column) and sigma (distribution
/// vs. distribution). Larger always means more similar.
enum class SimilarityKind { Cosine, NegEuclidean, NegKl };

/// Floor applied to probabilities inside neg_kl.
inline constexpr double kKlFloor = 1e-12;
/// Tolerance on |sum - 1| for inputs that must be probability vectors.
inline constexpr double kNormalizedTolerance = 1e-9;

/// a.b / (|a||b|). Throws ZeroVector if either norm is zero.
double cosine(const VectorRef& a, const VectorRef& b);

/// -|a - b|_2 (negated distance, not squared).
double neg_euclidean(const VectorRef& a, const VectorRef& b);

/// Max-subtracted softmax, no temperature.
Vector softmax(const VectorRef& v);

bool is_probability_vector(const VectorRef& p, double tol = kNormalizedTolerance);

/// -KL(p || q) with both sides clamped below at kKlFloor.
double neg_kl(const VectorRef& p, const VectorRef& q);

double similarity(SimilarityKind kind, const VectorRef& a, const VectorRef& b);

/// Inputs to the dense classification loss.
struct LossInputs {
  FeatureMap features;     // c x r
  Matrix weights;          // c x |C_base|, column j is p^(j)
  Vector bias;             // |C_base|
  Eigen::Index target = 0; // y
  double temperature = 1.0;
};

/// Mean over spatial positions of the cross-entropy of the temperature-scaled
/// logits t * (f_i . p_j + b_j).
double dense_classification_loss(const LossInputs& inputs);

}  // namespace cbm
