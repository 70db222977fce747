// Minimum-cost perfect matching on a square cost matrix.

#ifndef CROWDPAIR_ASSIGNMENT_H_
#define CROWDPAIR_ASSIGNMENT_H_

#include <vector>

#include "crowdpair/data_model.h"

namespace crowdpair {

// Returns assignment[i] = column matched to row i, minimizing the summed cost
// (Hungarian method with potentials, O(n^3)). Ties resolve deterministically.
std::vector<int> solve_assignment(const MatrixXd& cost);

double assignment_cost(const MatrixXd& cost, const std::vector<int>& assignment);

}  // namespace crowdpair

#endif  // CROWDPAIR_ASSIGNMENT_H_
