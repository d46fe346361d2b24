#pragma once

#include <vector>

#include "ralab/core.hpp"

namespace ralab {

// Minimum-cost perfect matching on a dense square cost matrix.
// Shortest augmenting paths with row/column potentials, O(n^3).
// Returns assignment[row] = column.
std::vector<int> solve_assignment(const Matrix& cost);

}  // namespace ralab
