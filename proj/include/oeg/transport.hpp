#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace oeg::transport {

struct Flow {
  int source = 0;
  int sink = 0;
  double mass = 0.0;
};

struct Plan {
  double cost = 0.0;
  std::vector<Flow> flows;
};

using CostFn = std::function<double(int source, int sink)>;

// Exact minimum-cost transport between nonnegative supplies and demands of
// equal total mass (demands are rescaled to the supply total). Successive
// shortest paths with Dijkstra on reduced costs over the dense bipartite
// graph; the cost function is evaluated lazily so no |S| x |D| matrix is
// stored. Costs must be nonnegative.
Plan solve(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const CostFn& cost);

// Earth mover's distance between two distributions over one shared support
// under a metric ground cost. Shared mass stays in place, so only the
// positive and negative parts of (a - b) are transported.
double shared_support_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                               const std::function<double(int, int)>& metric);

}  // namespace oeg::transport
