#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peerpanel/panel.hpp"
#include "peerpanel/types.hpp"

namespace peerpanel {

enum class NetworkKind { lim, liom, pliom, social, custom };

std::string to_string(NetworkKind kind);
NetworkKind network_kind_from_string(const std::string& name);

// Per-period N x N interaction matrices. Rows of individuals absent in a
// period are empty.
struct Network {
  NetworkKind kind = NetworkKind::custom;
  Index num_individuals = 0;
  std::vector<SparseMatrix> per_period;
  // Binary co-membership matrices A_s; filled for the persistent network.
  std::vector<SparseMatrix> adjacency_history;

  Index num_periods() const { return static_cast<Index>(per_period.size()); }
};

// Linear-in-means: G_ijt = 1(g(i,t) = g(j,t)) / N_g(i,t).
Network lim(const PanelIndex& panel);

// Linear-in-others'-means: excludes self, weight 1 / (N_g - 1). Rows of
// individuals alone in their group are all zero.
Network liom(const PanelIndex& panel);

// Persistent LIOM: rows of the cumulative co-membership count sum_{s<=t} A_s
// rescaled to sum to one. Links to former group mates persist.
Network pliom(const PanelIndex& panel);

// Seeded social network: each individual links to `links_per_person` others
// drawn uniformly within the current group; links persist while both ends
// stay in the same group and lost links are replaced by uniform draws over
// unlinked group mates. Groups of three or fewer are fully linked.
//
// Draws for individual i in period t come from the stream
// (seed, Stage::network, t, i), and replacements are resolved in
// individual-id order after all moves of the period.
Network social(const PanelIndex& panel, std::uint64_t seed, Index links_per_person = 2);

struct Edge {
  Index period;
  Index from;
  Index to;
  double weight;
};

// Build a CUSTOM network from an edge list over dense ids.
Network from_edges(const PanelIndex& panel, const std::vector<Edge>& edges);
std::vector<Edge> to_edges(const Network& net);

struct Violation {
  Index individual;
  Index period;
  std::string what;
};

// Check the kind-specific invariants; empty when clean.
std::vector<Violation> validate(const Network& net, const PanelIndex& panel, double tol = 1e-12);

}  // namespace peerpanel
