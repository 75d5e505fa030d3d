#include "peerpanel/networks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "peerpanel/errors.hpp"
#include "peerpanel/rng.hpp"

namespace peerpanel {

namespace {

SparseMatrix square(Index n, std::vector<Triplet>& t)
{
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

// Co-membership network: weight 1/(n - exclude) over the current group,
// self excluded when exclude == 1.
Network group_average(const PanelIndex& panel, NetworkKind kind, int exclude)
{
  const Index N = panel.num_individuals();
  Network net;
  net.kind = kind;
  net.num_individuals = N;
  for (Index t = 0; t < panel.num_periods(); ++t) {
    std::vector<Triplet> trip;
    for (Index m = 0; m < panel.num_groups(); ++m) {
      const auto& members = panel.members(m, t);
      const Index n = static_cast<Index>(members.size());
      if (n - exclude <= 0) continue;
      const double w = 1.0 / static_cast<double>(n - exclude);
      for (Index i : members)
        for (Index j : members)
          if (!(exclude && i == j)) trip.emplace_back(i, j, w);
    }
    net.per_period.push_back(square(N, trip));
  }
  return net;
}

SparseMatrix row_normalized(const SparseMatrix& A)
{
  SparseMatrix out = A;
  for (Index r = 0; r < out.rows(); ++r) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(out, r); it; ++it) sum += it.value();
    if (sum == 0.0) continue;
    for (SparseMatrix::InnerIterator it(out, r); it; ++it) it.valueRef() /= sum;
  }
  return out;
}

std::string describe(double value)
{
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

}  // namespace

std::string to_string(NetworkKind kind)
{
  switch (kind) {
    case NetworkKind::lim: return "lim";
    case NetworkKind::liom: return "liom";
    case NetworkKind::pliom: return "pliom";
    case NetworkKind::social: return "social";
    case NetworkKind::custom: return "custom";
  }
  return "custom";
}

NetworkKind network_kind_from_string(const std::string& name)
{
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "lim") return NetworkKind::lim;
  if (s == "liom") return NetworkKind::liom;
  if (s == "pliom") return NetworkKind::pliom;
  if (s == "social" || s == "soc") return NetworkKind::social;
  if (s == "custom") return NetworkKind::custom;
  throw ConfigViolation("unknown network kind '" + name + "'");
}

Network lim(const PanelIndex& panel) { return group_average(panel, NetworkKind::lim, 0); }

Network liom(const PanelIndex& panel) { return group_average(panel, NetworkKind::liom, 1); }

Network pliom(const PanelIndex& panel)
{
  const Index N = panel.num_individuals();
  Network net;
  net.kind = NetworkKind::pliom;
  net.num_individuals = N;
  SparseMatrix cumulative(N, N);
  for (Index t = 0; t < panel.num_periods(); ++t) {
    std::vector<Triplet> trip;
    for (Index m = 0; m < panel.num_groups(); ++m) {
      const auto& members = panel.members(m, t);
      for (Index i : members)
        for (Index j : members)
          if (i != j) trip.emplace_back(i, j, 1.0);
    }
    SparseMatrix A = square(N, trip);
    cumulative = SparseMatrix(cumulative + A);
    net.adjacency_history.push_back(A);

    // Only individuals observed in t carry a row.
    std::vector<Triplet> rows;
    for (Index i = 0; i < N; ++i) {
      if (panel.group_of(i, t) < 0) continue;
      for (SparseMatrix::InnerIterator it(cumulative, i); it; ++it)
        rows.emplace_back(i, it.col(), it.value());
    }
    net.per_period.push_back(row_normalized(square(N, rows)));
  }
  return net;
}

// Link sets are carried from the previous period; an individual absent in
// some period starts from scratch when they reappear.
Network social(const PanelIndex& panel, std::uint64_t seed, Index links_per_person)
{
  if (links_per_person < 1) throw ConfigViolation("links_per_person must be >= 1");
  const Index N = panel.num_individuals();
  Network net;
  net.kind = NetworkKind::social;
  net.num_individuals = N;

  std::vector<std::vector<Index>> links(static_cast<std::size_t>(N));
  for (Index t = 0; t < panel.num_periods(); ++t) {
    std::vector<std::vector<Index>> next(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) {
      const Index g = panel.group_of(i, t);
      if (g < 0) continue;
      const auto& members = panel.members(g, t);
      const Index n = static_cast<Index>(members.size());
      auto& out = next[i];
      if (n <= 3) {
        for (Index j : members)
          if (j != i) out.push_back(j);
        continue;
      }
      const Index target = std::min(links_per_person, n - 1);
      for (Index j : links[i])
        if (panel.group_of(j, t) == g && static_cast<Index>(out.size()) < target) out.push_back(j);

      std::vector<Index> pool;
      for (Index j : members)
        if (j != i && std::find(out.begin(), out.end(), j) == out.end()) pool.push_back(j);
      Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(Stage::network),
                                   static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)});
      for (Index k = 0; static_cast<Index>(out.size()) < target && k < static_cast<Index>(pool.size());
           ++k) {
        const Index pick = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool.size() - k)));
        std::swap(pool[k], pool[pick]);
        out.push_back(pool[k]);
      }
      std::sort(out.begin(), out.end());
    }
    links = std::move(next);

    std::vector<Triplet> trip;
    for (Index i = 0; i < N; ++i) {
      const auto& out = links[i];
      for (Index j : out) trip.emplace_back(i, j, 1.0 / static_cast<double>(out.size()));
    }
    net.per_period.push_back(square(N, trip));
  }
  return net;
}

Network from_edges(const PanelIndex& panel, const std::vector<Edge>& edges)
{
  const Index N = panel.num_individuals();
  const Index T = panel.num_periods();
  std::vector<std::vector<Triplet>> trip(static_cast<std::size_t>(T));
  std::set<std::tuple<Index, Index, Index>> seen;
  for (const auto& e : edges) {
    if (e.period < 0 || e.period >= T || e.from < 0 || e.from >= N || e.to < 0 || e.to >= N)
      throw DimensionMismatch("edge references an unknown period or individual");
    if (!std::isfinite(e.weight)) throw NonFinite("edge weight");
    if (!seen.emplace(e.period, e.from, e.to).second)
      throw DuplicateObservation("edge (" + std::to_string(e.from + 1) + ", " +
                                 std::to_string(e.to + 1) + ") in period " +
                                 std::to_string(e.period + 1));
    trip[e.period].emplace_back(e.from, e.to, e.weight);
  }
  Network net;
  net.kind = NetworkKind::custom;
  net.num_individuals = N;
  for (auto& t : trip) net.per_period.push_back(square(N, t));
  return net;
}

std::vector<Edge> to_edges(const Network& net)
{
  std::vector<Edge> edges;
  for (Index t = 0; t < net.num_periods(); ++t) {
    const SparseMatrix& G = net.per_period[t];
    for (Index i = 0; i < G.rows(); ++i)
      for (SparseMatrix::InnerIterator it(G, i); it; ++it)
        if (it.value() != 0.0) edges.push_back({t, i, it.col(), it.value()});
  }
  return edges;
}

std::vector<Violation> validate(const Network& net, const PanelIndex& panel, double tol)
{
  std::vector<Violation> out;
  const Index N = panel.num_individuals();
  if (net.num_individuals != N || net.num_periods() != panel.num_periods()) {
    out.push_back({-1, -1, "network dimensions do not match the panel"});
    return out;
  }
  // historical[i] = everyone i has shared a group with so far.
  std::vector<std::set<Index>> historical(static_cast<std::size_t>(N));

  for (Index t = 0; t < net.num_periods(); ++t) {
    const SparseMatrix& G = net.per_period[t];
    if (G.rows() != N || G.cols() != N) {
      out.push_back({-1, t, "period block is not N x N"});
      continue;
    }
    for (Index m = 0; m < panel.num_groups(); ++m)
      for (Index i : panel.members(m, t))
        for (Index j : panel.members(m, t))
          if (i != j) historical[i].insert(j);

    for (Index i = 0; i < N; ++i) {
      const Index g = panel.group_of(i, t);
      double sum = 0.0;
      Index nonzeros = 0;
      double first = 0.0;
      bool equal_weights = true;
      auto fail = [&](const std::string& what) { out.push_back({i, t, what}); };
      for (SparseMatrix::InnerIterator it(G, i); it; ++it) {
        const double w = it.value();
        if (w == 0.0) continue;
        const Index j = it.col();
        if (!std::isfinite(w)) {
          fail("non-finite weight");
          continue;
        }
        if (nonzeros == 0) first = w;
        if (std::abs(w - first) > tol) equal_weights = false;
        ++nonzeros;
        sum += w;
        if (g < 0) continue;
        if (net.kind != NetworkKind::custom && w < 0.0) fail("negative weight to " + std::to_string(j + 1));
        const bool same_group = panel.group_of(j, t) == g;
        switch (net.kind) {
          case NetworkKind::lim:
            if (!same_group) fail("link outside the current group to " + std::to_string(j + 1));
            else if (std::abs(w - 1.0 / panel.group_size(g, t)) > tol)
              fail("weight " + describe(w) + " differs from 1/group size");
            break;
          case NetworkKind::liom:
            if (j == i) fail("nonzero diagonal");
            else if (!same_group) fail("link outside the current group to " + std::to_string(j + 1));
            else if (std::abs(w - 1.0 / (panel.group_size(g, t) - 1)) > tol)
              fail("weight " + describe(w) + " differs from 1/(group size - 1)");
            break;
          case NetworkKind::pliom:
            if (j == i) fail("nonzero diagonal");
            else if (!historical[i].count(j)) fail("link to " + std::to_string(j + 1) + " who was never a group mate");
            break;
          case NetworkKind::social:
            if (j == i) fail("nonzero diagonal");
            else if (!same_group) fail("link outside the current group to " + std::to_string(j + 1));
            break;
          case NetworkKind::custom: break;
        }
      }
      if (g < 0) {
        if (nonzeros > 0) fail("individual not observed in this period has links");
        continue;
      }
      if (net.kind == NetworkKind::custom) continue;
      const Index n = panel.group_size(g, t);
      const bool may_be_empty =
          net.kind != NetworkKind::lim &&
          (net.kind == NetworkKind::pliom ? historical[i].empty() : n == 1);
      if (nonzeros == 0) {
        if (!may_be_empty) fail("empty row");
        continue;
      }
      if (std::abs(sum - 1.0) > tol * std::max<Index>(1, nonzeros))
        fail("row sum " + describe(sum) + " != 1");
      if (net.kind == NetworkKind::social && !equal_weights) fail("unequal link weights");
      if (net.kind == NetworkKind::social && n <= 3 && nonzeros != n - 1)
        fail("small group is not fully linked");
    }
  }
  return out;
}

}  // namespace peerpanel
