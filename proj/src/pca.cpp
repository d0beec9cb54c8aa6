#include "glossalign/pca.hpp"

#include <cmath>

#include "glossalign/rng.hpp"

namespace glossalign {

namespace {

constexpr double kConvergence = 1e-10;
constexpr int kMaxIters = 1000;

// Power iteration on the (implicit) covariance Xᵀ X of centered data.
// Returns a unit eigenvector estimate, or a zero vector when the residual
// variance is numerically nil (e.g. collinear points for the second
// component).
Vec top_component(const Matrix& centered, const Vec* deflate) {
  const std::size_t n = centered.rows(), d = centered.cols();

  Vec v(d);
  Rng rng(0x5ca1ab1eULL);  // fixed start vector, deterministic output
  for (auto& x : v) x = rng.next_gaussian();
  if (deflate) {
    const double c = dot(v, *deflate);
    axpy(-c, *deflate, v);
  }
  double nv = norm2(v);
  if (nv <= 1e-12) return Vec(d, 0.0);
  for (auto& x : v) x /= nv;

  Vec xv(n), next(d);
  for (int iter = 0; iter < kMaxIters; ++iter) {
    // next = Xᵀ (X v), with optional deflation of the first component
    for (std::size_t i = 0; i < n; ++i) {
      const double* ri = centered.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += ri[j] * v[j];
      xv[i] = s;
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* ri = centered.row(i);
      for (std::size_t j = 0; j < d; ++j) next[j] += ri[j] * xv[i];
    }
    if (deflate) {
      const double c = dot(next, *deflate);
      axpy(-c, *deflate, next);
    }
    const double nn = norm2(next);
    if (nn <= 1e-14) return Vec(d, 0.0);
    for (auto& x : next) x /= nn;
    double diff = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::fabs(next[j] - v[j]));
    // eigenvectors are sign-ambiguous; also check the flipped distance
    double diff_neg = 0.0;
    for (std::size_t j = 0; j < d; ++j) diff_neg = std::max(diff_neg, std::fabs(next[j] + v[j]));
    v = next;
    if (std::min(diff, diff_neg) < kConvergence) break;
  }

  // sign convention: largest-magnitude loading positive
  std::size_t arg = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (std::fabs(v[j]) > std::fabs(v[arg])) arg = j;
  if (v[arg] < 0.0)
    for (auto& x : v) x = -x;
  return v;
}

}  // namespace

Matrix pca_project_2d(const Matrix& points) {
  if (points.cols() < 2) throw Error(Err::DimMismatch, "pca_project_2d needs dim >= 2");
  if (points.rows() < 2) throw Error(Err::DegenerateSpread, "fewer than 2 points");
  if (!points.is_finite()) throw Error(Err::NonFiniteInput, "pca_project_2d input");

  const std::size_t n = points.rows(), d = points.cols();
  Vec mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j);
  for (auto& x : mean) x /= static_cast<double>(n);

  Matrix centered(n, d);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      centered(i, j) = points(i, j) - mean[j];
      spread += centered(i, j) * centered(i, j);
    }
  if (spread <= 1e-24) throw Error(Err::DegenerateSpread, "all points identical");

  const Vec pc1 = top_component(centered, nullptr);
  const Vec pc2 = top_component(centered, &pc1);

  Matrix out(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = centered.row(i);
    double x = 0.0, y = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x += ri[j] * pc1[j];
      y += ri[j] * pc2[j];
    }
    out(i, 0) = x;
    out(i, 1) = y;
  }
  return out;
}

}  // namespace glossalign
