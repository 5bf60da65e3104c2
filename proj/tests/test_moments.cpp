#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ace/moments.hpp"
#include "fixtures.hpp"

using namespace ace;
using namespace ace::test;

TEST_CASE("empirical moments of tiny datasets") {
  const Moments one = empirical_moments(Matrix{{1.0, 2.0}});
  CHECK(one.mu == Vector{{1.0, 2.0}});
  CHECK(one.cov.isZero(0.0));
  CHECK_FALSE(one.intervened_on.has_value());

  const Moments two = empirical_moments(Matrix{{-1.0, -1.0}, {1.0, 1.0}});
  CHECK(two.mu.isZero(0.0));
  CHECK(two.cov == Matrix::Ones(2, 2));

  CHECK_THROWS_AS(empirical_moments(Matrix(0, 3)), Error);
}

TEST_CASE("empirical moments match a two-pass computation") {
  Rng rng(31);
  const Matrix rows = random_matrix(rng, 1000, 4, 3.0).rowwise() + Vector{{1.0, -2.0, 5.0, 0.5}}.transpose();
  const Moments m = empirical_moments(rows);
  const Index n = rows.rows();
  for (Index a = 0; a < 4; ++a) {
    double mean = 0.0;
    for (Index r = 0; r < n; ++r) mean += rows(r, a);
    mean /= static_cast<double>(n);
    CHECK(std::abs(m.mu(a) - mean) < 1e-12);
  }
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      double s = 0.0;
      for (Index r = 0; r < n; ++r) s += (rows(r, a) - m.mu(a)) * (rows(r, b) - m.mu(b));
      CHECK(std::abs(m.cov(a, b) - s / static_cast<double>(n)) < 1e-12);
    }
  }
}

TEST_CASE("empirical moments are invariant under row permutation") {
  Rng rng(32);
  const Matrix rows = random_matrix(rng, 50, 3);
  std::vector<Index> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix shuffled(50, 3);
  for (Index r = 0; r < 50; ++r) shuffled.row(r) = rows.row(perm[static_cast<std::size_t>(r)]);
  const Moments a = empirical_moments(rows);
  const Moments b = empirical_moments(shuffled);
  CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("intervene zeroes one row and column and nothing else") {
  Moments m{Vector::Zero(2), Matrix::Ones(2, 2), std::nullopt};
  const Moments d = intervene(m, 0, 5.0);
  CHECK(d.mu(0) == 5.0);
  CHECK(d.cov == Matrix{{0.0, 0.0}, {0.0, 1.0}});
  REQUIRE(d.intervened_on.has_value());
  CHECK(d.intervened_on->index == 0);
  CHECK_THROWS_AS(intervene(d, 1, 0.0), Error);

  Moments z{Vector::Ones(2), Matrix{{0.0, 0.0}, {0.0, 2.0}}, std::nullopt};
  CHECK(intervene(z, 0, 1.0).cov == z.cov);

  Rng rng(33);
  const Matrix a = random_matrix(rng, 5, 5);
  Moments r{random_vector(rng, 5), a * a.transpose(), std::nullopt};
  const Moments ri = intervene(r, 2, -3.0);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) {
      if (i == 2 || j == 2)
        CHECK(ri.cov(i, j) == 0.0);
      else
        CHECK(ri.cov(i, j) == r.cov(i, j));
    }
    if (i != 2) CHECK(ri.mu(i) == r.mu(i));
  }
}

TEST_CASE("eigendecompose: identity, rank one, random reconstruction") {
  CHECK(eigendecompose(Matrix::Identity(3, 3)).eigenvalues.isApprox(Vector::Ones(3)));

  const Vector u{{3.0, 4.0}};
  const EigenPairs rank1 = eigendecompose(Matrix(u * u.transpose()));
  CHECK(rank1.eigenvalues(0) == doctest::Approx(25.0));
  CHECK(std::abs(rank1.eigenvalues(1)) < 1e-12);
  CHECK(std::abs(std::abs(rank1.eigenvectors.col(0).dot(u / 5.0)) - 1.0) < 1e-12);
  CHECK(rank1.scaled_directions().cols() == 1);

  Rng rng(34);
  const Matrix a = random_matrix(rng, 10, 10);
  const Matrix cov = a * a.transpose();
  const EigenPairs ep = eigendecompose(cov);
  CHECK((ep.reconstruct() - cov).norm() / cov.norm() < 1e-8);
  CHECK((ep.eigenvectors.transpose() * ep.eigenvectors - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-8);
  for (Index r = 1; r < 10; ++r) CHECK(ep.eigenvalues(r) <= ep.eigenvalues(r - 1));
  const Matrix v = ep.scaled_directions();
  CHECK((v * v.transpose() - cov).norm() / cov.norm() < 1e-8);
}

TEST_CASE("eigendecompose rejects asymmetric and indefinite input, clamps round-off") {
  try {
    eigendecompose(Matrix{{1.0, 0.5}, {0.0, 1.0}});
    FAIL("expected a symmetry error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_symmetric);
  }
  try {
    eigendecompose(Matrix{{1.0, 0.0}, {0.0, -1.0}});
    FAIL("expected a PSD error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_psd);
  }
  const EigenPairs clamped = eigendecompose(Matrix{{1.0, 0.0}, {0.0, -1e-14}});
  CHECK(clamped.eigenvalues(1) == 0.0);
}

TEST_CASE("datasets: default names, observed domains, validation") {
  const Dataset d = make_dataset(Matrix{{1.0, 4.0}, {3.0, 2.0}});
  CHECK(d.feature_names == std::vector<std::string>{"x0", "x1"});
  CHECK(d.domains[0].low == 1.0);
  CHECK(d.domains[1].high == 4.0);
  CHECK(d.feature_index("x1") == 1);
  CHECK_THROWS_AS(make_dataset(Matrix{{1.0, 4.0}}, {"a", "b"}, {{0.0, 2.0}, {5.0, 6.0}}), Error);
  CHECK_THROWS_AS(make_dataset(Matrix(0, 2)), Error);

  SequenceDataset s = make_sequence_dataset({Matrix{{1.0}, {2.0}}, Matrix{{3.0}, {-1.0}, {7.0}}});
  CHECK(s.min_length() == 2);
  CHECK(s.max_length() == 3);
  CHECK(s.slot_domain(1, 0).low == -1.0);
  CHECK(s.slot_domain(2, 0).high == 7.0);
  s.feature_domains[0] = Domain{-10.0, 10.0};
  CHECK(s.slot_domain(2, 0).low == -10.0);
}
