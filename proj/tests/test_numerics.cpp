#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glossalign/kernels.hpp"
#include "glossalign/pca.hpp"
#include "glossalign/rng.hpp"

using namespace glossalign;
namespace k = glossalign::kernels;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = scale * (2.0 * rng.next_double() - 1.0);
  return m;
}

}  // namespace

TEST_CASE("softmax rows: symmetry, ratios, shift invariance") {
  Matrix a = k::softmax_rows(Matrix::from_rows({{0.0, 0.0}}));
  CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(a(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  Matrix b = k::softmax_rows(Matrix::from_rows({{std::log(2.0), 0.0}}));
  CHECK(b(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(b(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Matrix c = k::softmax_rows(Matrix::from_rows({{5.0, 5.0}, {1.0, 1.0}}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(c(i, j) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(k::softmax_rows(Matrix()).empty());
}

TEST_CASE("softmax rows sum to 1 and shift-invariance property") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = random_matrix(rng, 1 + rng.next_below(5), 1 + rng.next_below(6), 4.0);
    Matrix y = k::softmax_rows(m);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) {
        CHECK(y(i, j) > 0.0);
        sum += y(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    Matrix shifted = m;
    const double c = 10.0 * (rng.next_double() - 0.5);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) shifted(i, j) += c;
    Matrix ys = k::softmax_rows(shifted);
    for (std::size_t idx = 0; idx < y.data().size(); ++idx)
      CHECK(std::fabs(ys.data()[idx] - y.data()[idx]) < 1e-9);
  }
}

TEST_CASE("l2_normalize_rows examples and idempotence") {
  Matrix a = k::l2_normalize_rows(Matrix::from_rows({{3.0, 4.0}}));
  CHECK(a(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(a(0, 1) == doctest::Approx(0.8).epsilon(1e-12));

  Matrix eye = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  Matrix b = k::l2_normalize_rows(eye);
  CHECK(b == eye);

  CHECK_THROWS_WITH_AS(k::l2_normalize_rows(Matrix::from_rows({{0.0, 0.0}})),
                       doctest::Contains("ZeroRow"), Error);

  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix m = random_matrix(rng, 1 + rng.next_below(4), 2 + rng.next_below(5));
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, 0) += 2.0;  // keep rows off zero
    Matrix once = k::l2_normalize_rows(m);
    Matrix twice = k::l2_normalize_rows(once);
    for (std::size_t idx = 0; idx < once.data().size(); ++idx)
      CHECK(std::fabs(once.data()[idx] - twice.data()[idx]) < 1e-9);
    for (std::size_t i = 0; i < once.rows(); ++i) {
      double n = 0.0;
      for (std::size_t j = 0; j < once.cols(); ++j) n += once(i, j) * once(i, j);
      CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("cosine_sim_matrix examples, symmetry, dim mismatch") {
  Matrix eye = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(k::cosine_sim_matrix(eye, eye) == eye);

  const double h = std::sqrt(2.0) / 2.0;
  Matrix a = Matrix::from_rows({{1.0, 0.0}});
  Matrix b = Matrix::from_rows({{h, h}});
  CHECK(k::cosine_sim_matrix(a, b)(0, 0) == doctest::Approx(h).epsilon(1e-12));

  Matrix anti = Matrix::from_rows({{-1.0, 0.0}});
  CHECK(k::cosine_sim_matrix(a, anti)(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(k::cosine_sim_matrix(a, Matrix::from_rows({{1.0, 0.0, 0.0}})),
                       doctest::Contains("DimMismatch"), Error);

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m = random_matrix(rng, 2 + rng.next_below(4), 2 + rng.next_below(5));
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, 0) += 2.0;
    Matrix u = k::l2_normalize_rows(m);
    Matrix sim = k::cosine_sim_matrix(u, u);
    for (std::size_t i = 0; i < sim.rows(); ++i) {
      CHECK(sim(i, i) == doctest::Approx(1.0).epsilon(1e-9));
      for (std::size_t j = 0; j < sim.cols(); ++j) {
        CHECK(sim(i, j) == doctest::Approx(sim(j, i)).epsilon(1e-9));
        CHECK(sim(i, j) <= 1.0 + 1e-9);
        CHECK(sim(i, j) >= -1.0 - 1e-9);
      }
    }
  }
}

TEST_CASE("parallel kernels match serial references bitwise") {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a = random_matrix(rng, 33, 47);
    Matrix b = random_matrix(rng, 47, 29);
    CHECK(k::matmul(a, b) == k::serial::matmul(a, b));
    Matrix s = random_matrix(rng, 40, 30, 3.0);
    CHECK(k::softmax_rows(s) == k::serial::softmax_rows(s));
    Matrix c = random_matrix(rng, 21, 16);
    Matrix d = random_matrix(rng, 18, 16);
    CHECK(k::cosine_sim_matrix(c, d) == k::serial::cosine_sim_matrix(c, d));
  }
}

TEST_CASE("pca: collinear points land on the first component") {
  Matrix pts = Matrix::from_rows({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
  Matrix coords = pca_project_2d(pts);
  const double s3 = std::sqrt(3.0);
  CHECK(coords(0, 0) == doctest::Approx(-s3).epsilon(1e-8));
  CHECK(coords(1, 0) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(coords(2, 0) == doctest::Approx(s3).epsilon(1e-8));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(coords(i, 1)) < 1e-8);
}

TEST_CASE("pca: identical points are degenerate") {
  Matrix pts = Matrix::from_rows({{1.0, 2.0}, {1.0, 2.0}});
  CHECK_THROWS_WITH_AS(pca_project_2d(pts), doctest::Contains("DegenerateSpread"), Error);
}

TEST_CASE("pca: centered axis-aligned 2-D input is recovered up to order/sign") {
  // variance 8 along x, 2 along y; PC1 = +x, PC2 = +y
  Matrix pts = Matrix::from_rows({{2.0, 0.0}, {-2.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}});
  Matrix coords = pca_project_2d(pts);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    CHECK(coords(i, 0) == doctest::Approx(pts(i, 0)).epsilon(1e-8));
    CHECK(coords(i, 1) == doctest::Approx(pts(i, 1)).epsilon(1e-8));
  }
}

TEST_CASE("pca translation invariance") {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix pts = random_matrix(rng, 3 + rng.next_below(6), 2 + rng.next_below(4));
    Matrix shifted = pts;
    Vec offset(pts.cols());
    for (auto& v : offset) v = 5.0 * (rng.next_double() - 0.5);
    for (std::size_t i = 0; i < pts.rows(); ++i)
      for (std::size_t j = 0; j < pts.cols(); ++j) shifted(i, j) += offset[j];
    Matrix a = pca_project_2d(pts);
    Matrix b = pca_project_2d(shifted);
    for (std::size_t idx = 0; idx < a.data().size(); ++idx)
      CHECK(std::fabs(a.data()[idx] - b.data()[idx]) < 1e-8);
  }
}
