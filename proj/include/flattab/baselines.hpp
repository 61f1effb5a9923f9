#pragma once

#include <vector>

#include "flattab/sampling.hpp"

namespace flattab {

// L2-regularized logistic regression fitted on the meta split by Newton
// iterations (bias unregularized), argmax predictions on the target rows.
// Multi-class tasks use one-vs-rest scoring. Throws when the meta split
// contains a single class; evaluation treats that as an abstention.
std::vector<int> baseline_lr(const Task& task, double l2 = 1.0);

// Euclidean k-nearest-neighbour majority vote. Distance ties break toward
// the lower meta row index, vote ties toward the smaller class id.
std::vector<int> baseline_knn(const Task& task, int k);

}  // namespace flattab
