#pragma once

#include <span>
#include <vector>

#include "gstds/data_model.hpp"
#include "gstds/matrix.hpp"

namespace gstds {

struct SimilarityMatrix {
  Matrix entries;  // n x n, symmetric, unit diagonal
  size_t n = 0;
};

struct LaplacianMatrix {
  Matrix entries;  // symmetric, zero row sums
};

struct FiedlerScores {
  std::vector<double> phi;  // unit vector
  double lambda2 = 0.0;
  bool sign_flipped = false;     // sign convention negated the raw vector
  bool lambda2_multiple = false; // eigenvalue gap to lambda3 below tolerance
};

struct Ranking {
  std::vector<size_t> order;  // phi[order[0]] >= phi[order[1]] >= ...
};

struct EigenDecomposition {
  std::vector<double> values;  // ascending, ties broken by original column
  Matrix vectors;              // column j pairs with values[j]
};

// Cosine similarity of the batch rows, symmetrized as (A + A^T)/2 with the
// diagonal forced to exactly 1. clamp_negative zeroes negative entries.
SimilarityMatrix cosine_similarity(const Matrix& batch_features,
                                   bool clamp_negative = false);
SimilarityMatrix cosine_similarity(const FeatureSet& fs,
                                   std::span<const size_t> batch,
                                   bool clamp_negative = false);

// L = D - S with D_ii = sum_j S_ij (diagonal of S included; the +1 and -1
// cancel, leaving L unchanged versus excluding it).
LaplacianMatrix laplacian(const SimilarityMatrix& s);

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// tol, at most max_sweeps sweeps.
EigenDecomposition jacobi_eigen(const Matrix& sym, double tol = 1e-10,
                                int max_sweeps = 100);

FiedlerScores fiedler_vector(const LaplacianMatrix& l);

// Stable descending sort of phi; equal values keep original index order.
Ranking rank_descending(const FiedlerScores& scores);

}  // namespace gstds
