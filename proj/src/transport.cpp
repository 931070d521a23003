#include "oeg/transport.hpp"

#include "oeg/error.hpp"

#include <algorithm>
#include <limits>

namespace oeg::transport {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kCachedCostLimit = std::size_t{1} << 22;

struct SinkFlow {
  int source;
  double mass;
};

}  // namespace

Plan solve(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const CostFn& cost) {
  const int ns = static_cast<int>(supply.size());
  const int nd = static_cast<int>(demand.size());
  if ((supply.array() < 0.0).any() || (demand.array() < 0.0).any()) {
    fail(ErrorKind::InvalidArgument, "transport masses must be nonnegative");
  }
  const double total = supply.sum();
  Plan plan;
  if (ns == 0 || nd == 0 || !(total > 0.0)) return plan;
  const double demand_total = demand.sum();
  if (!(demand_total > 0.0)) fail(ErrorKind::InvalidArgument, "demand has no mass");
  const double tol = 1e-14 * total;

  std::vector<double> rem_supply(supply.data(), supply.data() + ns);
  std::vector<double> rem_demand(nd);
  for (int j = 0; j < nd; ++j) rem_demand[j] = demand(j) * (total / demand_total);

  std::vector<double> cached;
  const bool use_cache = static_cast<std::size_t>(ns) * static_cast<std::size_t>(nd) <= kCachedCostLimit;
  if (use_cache) {
    cached.resize(static_cast<std::size_t>(ns) * nd);
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < nd; ++j) {
        const double c = cost(i, j);
        if (!(c >= 0.0)) fail(ErrorKind::InvalidArgument, "transport costs must be nonnegative");
        cached[static_cast<std::size_t>(i) * nd + j] = c;
      }
    }
  }
  auto arc_cost = [&](int i, int j) {
    return use_cache ? cached[static_cast<std::size_t>(i) * nd + j] : cost(i, j);
  };

  const int nodes = ns + nd;
  std::vector<double> potential(nodes, 0.0), dist(nodes);
  std::vector<int> parent(nodes);
  std::vector<char> done(nodes);
  std::vector<std::vector<SinkFlow>> flows(nd);
  double remaining = total;

  while (remaining > tol) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (int i = 0; i < ns; ++i) {
      if (rem_supply[i] > tol) dist[i] = 0.0;
    }

    int target = -1;
    while (true) {
      int u = -1;
      double best = kInf;
      for (int v = 0; v < nodes; ++v) {
        if (!done[v] && dist[v] < best) best = dist[v], u = v;
      }
      if (u < 0) break;
      done[u] = 1;
      if (u >= ns && rem_demand[u - ns] > tol) {
        target = u;
        break;
      }
      if (u < ns) {
        for (int j = 0; j < nd; ++j) {
          const int v = ns + j;
          if (done[v]) continue;
          const double nd_dist = dist[u] + std::max(0.0, arc_cost(u, j) + potential[u] - potential[v]);
          if (nd_dist < dist[v]) dist[v] = nd_dist, parent[v] = u;
        }
      } else {
        const int j = u - ns;
        for (const auto& f : flows[j]) {
          if (f.mass <= tol || done[f.source]) continue;
          const double nd_dist =
              dist[u] + std::max(0.0, -arc_cost(f.source, j) + potential[u] - potential[f.source]);
          if (nd_dist < dist[f.source]) dist[f.source] = nd_dist, parent[f.source] = u;
        }
      }
    }
    if (target < 0) fail(ErrorKind::InvalidArgument, "transport problem is infeasible");

    const double reach = dist[target];
    for (int v = 0; v < nodes; ++v) potential[v] += std::min(dist[v], reach);

    // Bottleneck along the path source -> ... -> target.
    double push = rem_demand[target - ns];
    int v = target;
    while (parent[v] >= 0) {
      const int u = parent[v];
      if (u >= ns) {  // backward arc sink u -> source v
        for (const auto& f : flows[u - ns]) {
          if (f.source == v) push = std::min(push, f.mass);
        }
      }
      v = u;
    }
    push = std::min(push, rem_supply[v]);

    v = target;
    while (parent[v] >= 0) {
      const int u = parent[v];
      if (u < ns) {
        auto& list = flows[v - ns];
        auto it = std::find_if(list.begin(), list.end(), [u](const SinkFlow& f) { return f.source == u; });
        if (it == list.end()) list.push_back({u, push});
        else it->mass += push;
      } else {
        auto& list = flows[u - ns];
        auto it = std::find_if(list.begin(), list.end(), [v](const SinkFlow& f) { return f.source == v; });
        it->mass -= push;
        if (it->mass <= tol) list.erase(it);
      }
      v = u;
    }
    rem_supply[v] -= push;
    if (rem_supply[v] <= tol) rem_supply[v] = 0.0;
    rem_demand[target - ns] -= push;
    if (rem_demand[target - ns] <= tol) rem_demand[target - ns] = 0.0;
    remaining -= push;
    if (push <= 0.0) break;
  }

  for (int j = 0; j < nd; ++j) {
    for (const auto& f : flows[j]) {
      plan.flows.push_back({f.source, j, f.mass});
      plan.cost += f.mass * arc_cost(f.source, j);
    }
  }
  std::sort(plan.flows.begin(), plan.flows.end(), [](const Flow& a, const Flow& b) {
    return a.source != b.source ? a.source < b.source : a.sink < b.sink;
  });
  return plan;
}

double shared_support_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                               const std::function<double(int, int)>& metric) {
  if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "distributions differ in support size");
  std::vector<int> sources, sinks;
  std::vector<double> supply, demand;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double diff = a(i) - b(i);
    if (diff > 0.0) sources.push_back(static_cast<int>(i)), supply.push_back(diff);
    else if (diff < 0.0) sinks.push_back(static_cast<int>(i)), demand.push_back(-diff);
  }
  if (sources.empty() || sinks.empty()) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> s(supply.data(), static_cast<Eigen::Index>(supply.size()));
  const Eigen::Map<const Eigen::VectorXd> d(demand.data(), static_cast<Eigen::Index>(demand.size()));
  return solve(s, d, [&](int i, int j) { return metric(sources[i], sinks[j]); }).cost;
}

}  // namespace oeg::transport
