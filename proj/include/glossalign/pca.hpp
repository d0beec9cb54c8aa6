#pragma once

#include "glossalign/matrix.hpp"

namespace glossalign {

/// Projects points (n×d, n >= 2, d >= 2) onto their top-2 principal
/// components via power iteration with deflation. Points are centered
/// first, so the result is translation-invariant. Each component's sign is
/// fixed so its largest-magnitude loading is positive. Throws
/// DegenerateSpread when all points are identical.
Matrix pca_project_2d(const Matrix& points);

}  // namespace glossalign
