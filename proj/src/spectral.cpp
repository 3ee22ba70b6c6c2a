#include "gstds/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gstds/errors.hpp"

namespace gstds {

namespace {

SimilarityMatrix finish_similarity(Matrix a, bool clamp_negative) {
  size_t n = a.rows;
  SimilarityMatrix s;
  s.n = n;
  s.entries = Matrix(n, n);
  for (size_t i = 0; i < n; ++i) {
    s.entries(i, i) = 1.0;
    for (size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      if (clamp_negative && v < 0.0) v = 0.0;
      s.entries(i, j) = v;
      s.entries(j, i) = v;
    }
  }
  return s;
}

}  // namespace

SimilarityMatrix cosine_similarity(const Matrix& batch_features,
                                   bool clamp_negative) {
  size_t n = batch_features.rows;
  size_t d = batch_features.cols;
  if (n < 2)
    throw Error(ErrorCode::invalid_argument,
                "similarity needs at least 2 rows");
  std::vector<double> norms(n);
  for (size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (size_t j = 0; j < d; ++j) {
      double v = batch_features(i, j);
      sq += v * v;
    }
    if (sq == 0.0)
      throw Error(ErrorCode::zero_feature_row,
                  "zero feature row " + std::to_string(i) + " in batch");
    norms[i] = std::sqrt(sq);
  }
  Matrix a(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < d; ++k)
        dot += batch_features(i, k) * batch_features(j, k);
      a(i, j) = dot / (norms[i] * norms[j]);
    }
  return finish_similarity(std::move(a), clamp_negative);
}

SimilarityMatrix cosine_similarity(const FeatureSet& fs,
                                   std::span<const size_t> batch,
                                   bool clamp_negative) {
  size_t n = batch.size();
  if (n < 2)
    throw Error(ErrorCode::invalid_argument,
                "similarity needs at least 2 rows");
  Matrix feats(n, fs.dim);
  for (size_t i = 0; i < n; ++i) {
    auto r = fs.row(batch[i]);
    for (size_t j = 0; j < fs.dim; ++j) feats(i, j) = r[j];
  }
  return cosine_similarity(feats, clamp_negative);
}

LaplacianMatrix laplacian(const SimilarityMatrix& s) {
  size_t n = s.n;
  LaplacianMatrix l;
  l.entries = Matrix(n, n);
  for (size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (size_t j = 0; j < n; ++j) degree += s.entries(i, j);
    for (size_t j = 0; j < n; ++j) l.entries(i, j) = -s.entries(i, j);
    l.entries(i, i) += degree;
  }
  return l;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sq = 0.0;
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t j = 0; j < a.cols; ++j)
      if (i != j) sq += a(i, j) * a(i, j);
  return std::sqrt(sq);
}

}  // namespace

EigenDecomposition jacobi_eigen(const Matrix& sym, double tol,
                                int max_sweeps) {
  size_t n = sym.rows;
  if (n == 0 || sym.cols != n)
    throw Error(ErrorCode::invalid_argument, "jacobi needs a square matrix");
  Matrix a = sym;
  Matrix v = Matrix::identity(n);

  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > tol && sweep < max_sweeps) {
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        for (size_t k = 0; k < n; ++k) {
          double akp = a(k, p);
          double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          double apk = a(p, k);
          double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (size_t k = 0; k < n; ++k) {
          double vkp = v(k, p);
          double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = off_diagonal_norm(a);
    ++sweep;
  }
  if (off > tol)
    throw Error(ErrorCode::non_convergence,
                "jacobi residual " + std::to_string(off) + " after " +
                    std::to_string(sweep) + " sweeps");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (a(i, i) != a(j, j)) return a(i, i) < a(j, j);
    return i < j;
  });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

FiedlerScores fiedler_vector(const LaplacianMatrix& l) {
  size_t n = l.entries.rows;
  if (n < 2)
    throw Error(ErrorCode::invalid_argument,
                "Fiedler vector needs at least 2 nodes");
  auto eig = jacobi_eigen(l.entries);

  FiedlerScores out;
  out.lambda2 = eig.values[1];
  double scale = std::max(1.0, std::abs(eig.values[n - 1]));
  out.lambda2_multiple =
      n > 2 && std::abs(eig.values[2] - eig.values[1]) < 1e-9 * scale;

  out.phi.resize(n);
  double norm_sq = 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out.phi[i] = eig.vectors(i, 1);
    norm_sq += out.phi[i] * out.phi[i];
    sum += out.phi[i];
  }
  double norm = std::sqrt(norm_sq);
  for (auto& x : out.phi) x /= norm;
  sum /= norm;

  bool flip = false;
  if (std::abs(sum) > 1e-12) {
    flip = sum < 0.0;
  } else {
    for (size_t i = 0; i < n; ++i) {
      if (std::abs(out.phi[i]) > 1e-12) {
        flip = out.phi[i] < 0.0;
        break;
      }
    }
  }
  if (flip)
    for (auto& x : out.phi) x = -x;
  out.sign_flipped = flip;
  return out;
}

Ranking rank_descending(const FiedlerScores& scores) {
  Ranking r;
  r.order.resize(scores.phi.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](size_t i, size_t j) {
    return scores.phi[i] > scores.phi[j];
  });
  return r;
}

}  // namespace gstds
