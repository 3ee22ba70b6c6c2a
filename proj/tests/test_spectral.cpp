#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gstds/errors.hpp"
#include "gstds/rng.hpp"
#include "gstds/spectral.hpp"
#include "oracle_eigen.hpp"

using namespace gstds;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  size_t r = rows.size();
  size_t c = rows.begin()->size();
  Matrix m(r, c);
  size_t i = 0;
  for (const auto& row : rows) {
    size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix random_batch(RngStream& rng, size_t n, size_t d) {
  Matrix m(n, d);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  auto s = cosine_similarity(rows_of({{1, 0}, {0, 1}}));
  CHECK(s.entries(0, 0) == 1.0);
  CHECK(s.entries(1, 1) == 1.0);
  CHECK(s.entries(0, 1) == doctest::Approx(0.0));

  auto collinear = cosine_similarity(rows_of({{1, 2}, {2, 4}}));
  CHECK(collinear.entries(0, 1) == doctest::Approx(1.0));

  auto antipodal = cosine_similarity(rows_of({{1, 0}, {-1, 0}}));
  CHECK(antipodal.entries(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("cosine similarity rejects degenerate inputs") {
  CHECK_THROWS_AS(cosine_similarity(rows_of({{1.0, 2.0}})), Error);
  CHECK_THROWS_AS(cosine_similarity(rows_of({{1, 0}, {0, 0}})), Error);
}

TEST_CASE("clamp_negative zeroes negative entries only") {
  auto s = cosine_similarity(rows_of({{1, 0}, {-1, 0.2}}), true);
  CHECK(s.entries(0, 1) == 0.0);
  CHECK(s.entries(0, 0) == 1.0);
}

TEST_CASE("laplacian of the all-ones 2x2 similarity") {
  SimilarityMatrix s;
  s.n = 2;
  s.entries = rows_of({{1, 1}, {1, 1}});
  auto l = laplacian(s);
  CHECK(l.entries(0, 0) == doctest::Approx(1.0));
  CHECK(l.entries(0, 1) == doctest::Approx(-1.0));
  CHECK(l.entries(1, 0) == doctest::Approx(-1.0));
  CHECK(l.entries(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("laplacian of three hand-computed cosines") {
  double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto s = cosine_similarity(
      rows_of({{1, 0}, {0, 1}, {inv_sqrt2, inv_sqrt2}}));
  CHECK(s.entries(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.entries(0, 2) == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(s.entries(1, 2) == doctest::Approx(0.70711).epsilon(1e-4));
  auto l = laplacian(s);
  // degree sums the full similarity row, so L(i,i) = d_i - s_ii = d_i - 1
  CHECK(l.entries(0, 0) == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(l.entries(2, 2) == doctest::Approx(1.41421).epsilon(1e-4));
  for (size_t i = 0; i < 3; ++i) {
    double row_sum = 0.0;
    for (size_t j = 0; j < 3; ++j) row_sum += l.entries(i, j);
    CHECK(std::abs(row_sum) < 1e-9);
  }
}

TEST_CASE("laplacian symmetry and zero row sums on random batches") {
  RngStream rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 2 + rng.below(63);
    size_t d = 2 + rng.below(31);
    auto s = cosine_similarity(random_batch(rng, n, d));
    auto l = laplacian(s);
    for (size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (size_t j = 0; j < n; ++j) {
        CHECK(l.entries(i, j) == l.entries(j, i));
        row_sum += l.entries(i, j);
      }
      CHECK(std::abs(row_sum) < 1e-9);
    }
  }
}

TEST_CASE("fiedler vector of the path of length 2") {
  LaplacianMatrix l;
  l.entries = rows_of({{1, -1}, {-1, 1}});
  auto scores = fiedler_vector(l);
  CHECK(scores.lambda2 == doctest::Approx(2.0));
  CHECK(scores.phi[0] == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(scores.phi[1] == doctest::Approx(-0.70711).epsilon(1e-4));
}

TEST_CASE("complete graph K3 has lambda2 = 3 and phi orthogonal to ones") {
  SimilarityMatrix s;
  s.n = 3;
  s.entries = rows_of({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  auto scores = fiedler_vector(laplacian(s));
  CHECK(scores.lambda2 == doctest::Approx(3.0).epsilon(1e-9));
  double dot_ones = scores.phi[0] + scores.phi[1] + scores.phi[2];
  double norm = 0.0;
  for (double x : scores.phi) norm += x * x;
  CHECK(std::abs(dot_ones) < 1e-8);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(scores.lambda2_multiple);
}

TEST_CASE("two disconnected cliques give lambda2 = 0") {
  LaplacianMatrix l;
  l.entries = rows_of({{1, -1, 0, 0},
                       {-1, 1, 0, 0},
                       {0, 0, 1, -1},
                       {0, 0, -1, 1}});
  auto scores = fiedler_vector(l);
  CHECK(std::abs(scores.lambda2) < 1e-9);
  // phi is a unit vector in the kernel: L * phi = 0
  double norm = 0.0;
  for (size_t i = 0; i < 4; ++i) {
    double row = 0.0;
    for (size_t j = 0; j < 4; ++j) row += l.entries(i, j) * scores.phi[j];
    CHECK(std::abs(row) < 1e-8);
    norm += scores.phi[i] * scores.phi[i];
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
  // independent oracle on the same 4x4
  double l2 = oracle::kth_eigenvalue(l.entries, 1);
  CHECK(std::abs(l2) < 1e-9);
}

TEST_CASE("jacobi agrees with the brute-force oracle on small batches") {
  RngStream rng(23);
  int simple_checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 2 + rng.below(7);
    size_t d = 2 + rng.below(31);
    auto lap = laplacian(cosine_similarity(random_batch(rng, n, d)));
    auto scores = fiedler_vector(lap);
    double l2 = oracle::kth_eigenvalue(lap.entries, 1);
    CHECK(std::abs(scores.lambda2 - l2) < 1e-8);
    double l3 = n > 2 ? oracle::kth_eigenvalue(lap.entries, 2) : l2 + 1.0;
    if (std::abs(l3 - l2) > 1e-6) {
      auto vec = oracle::eigenvector_at(lap.entries, l2);
      double dot = 0.0;
      for (size_t i = 0; i < n; ++i) dot += vec[i] * scores.phi[i];
      CHECK(std::abs(dot) > 1.0 - 1e-6);
      ++simple_checked;
    }
  }
  CHECK(simple_checked > 100);
}

TEST_CASE("nonnegative similarities give a PSD spectrum") {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 2 + rng.below(15);
    auto s = cosine_similarity(random_batch(rng, n, 8), true);
    auto lap = laplacian(s);
    auto eig = jacobi_eigen(lap.entries);
    CHECK(eig.values.front() >= -1e-9);
    CHECK(std::abs(eig.values.front()) < 1e-9);  // constant kernel vector
    auto scores = fiedler_vector(lap);
    if (!scores.lambda2_multiple && scores.lambda2 > 1e-8) {
      // away from kernel degeneracy phi is orthogonal to the constant vector
      double dot_ones = 0.0;
      for (double x : scores.phi) dot_ones += x;
      CHECK(std::abs(dot_ones) <= 1e-6 * std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("ranking is a stable descending argsort") {
  FiedlerScores s;
  s.phi = {0.9, -0.2, 0.5};
  auto r = rank_descending(s);
  CHECK(r.order == std::vector<size_t>{0, 2, 1});

  FiedlerScores equal;
  equal.phi = {0.3, 0.3, 0.3, 0.3};
  CHECK(rank_descending(equal).order == std::vector<size_t>{0, 1, 2, 3});

  FiedlerScores pair;
  pair.phi = {0.70711, -0.70711};
  CHECK(rank_descending(pair).order == std::vector<size_t>{0, 1});
}

TEST_CASE("ranking invariant under positive rescaling of phi") {
  RngStream rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    FiedlerScores s;
    for (int i = 0; i < 12; ++i) s.phi.push_back(rng.normal());
    auto base = rank_descending(s);
    FiedlerScores scaled = s;
    double c = 0.1 + rng.uniform() * 10.0;
    for (auto& x : scaled.phi) x *= c;
    CHECK(rank_descending(scaled).order == base.order);
    // applying the order yields a nonincreasing sequence
    for (size_t j = 0; j + 1 < base.order.size(); ++j)
      CHECK(s.phi[base.order[j]] >= s.phi[base.order[j + 1]]);
  }
}
