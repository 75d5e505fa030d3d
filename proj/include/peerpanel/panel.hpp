#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "peerpanel/types.hpp"

namespace peerpanel {

// One raw (individual, period, group) observation as read from disk.
struct Record {
  std::string individual;
  std::string period;
  std::string group;
};

// Dense ids of one stacked observation row.
struct Observation {
  Index individual;
  Index period;
  Index group;
};

// Who is in which group in which period.
//
// Rows are ordered period-major, then by individual id, which is the row
// order of every stacked matrix built from the panel. Unbalanced panels are
// allowed: an individual may be absent from some periods.
class PanelIndex {
 public:
  PanelIndex() = default;

  // groups_by_period[t][i] is the group id of individual i in period t, or
  // -1 when i is not observed in t. Group ids must lie in [0, num_groups).
  static PanelIndex from_assignment(std::vector<std::vector<Index>> groups_by_period,
                                    Index num_groups);

  Index num_individuals() const { return n_; }
  Index num_groups() const { return m_; }
  Index num_periods() const { return t_; }
  Index num_rows() const { return static_cast<Index>(obs_.size()); }
  bool balanced() const { return num_rows() == n_ * t_; }

  const std::vector<Observation>& observations() const { return obs_; }
  const Observation& row(Index r) const { return obs_[static_cast<std::size_t>(r)]; }

  // -1 when (i, t) is not observed.
  Index group_of(Index i, Index t) const { return group_[t][i]; }
  Index row_of(Index i, Index t) const { return row_[t][i]; }

  Index group_size(Index m, Index t) const
  {
    return static_cast<Index>(members_[t][m].size());
  }
  // Sorted member ids of group m in period t.
  const std::vector<Index>& members(Index m, Index t) const { return members_[t][m]; }

  Index period_begin(Index t) const { return period_offset_[t]; }
  Index period_rows(Index t) const { return period_offset_[t + 1] - period_offset_[t]; }

  // Label dictionaries; default labels are the 1-based ids.
  const std::vector<std::string>& individual_labels() const { return individual_labels_; }
  const std::vector<std::string>& period_labels() const { return period_labels_; }
  const std::vector<std::string>& group_labels() const { return group_labels_; }
  void set_labels(std::vector<std::string> individuals, std::vector<std::string> periods,
                  std::vector<std::string> groups);

  Index individual_id(const std::string& label) const;
  Index period_id(const std::string& label) const;
  Index group_id(const std::string& label) const;

 private:
  Index n_ = 0;
  Index m_ = 0;
  Index t_ = 0;
  std::vector<std::vector<Index>> group_;
  std::vector<std::vector<Index>> row_;
  std::vector<Observation> obs_;
  std::vector<std::vector<std::vector<Index>>> members_;
  std::vector<Index> period_offset_;
  std::vector<std::string> individual_labels_;
  std::vector<std::string> period_labels_;
  std::vector<std::string> group_labels_;
  std::unordered_map<std::string, Index> individual_ids_;
  std::unordered_map<std::string, Index> period_ids_;
  std::unordered_map<std::string, Index> group_ids_;
};

// Densify labels into contiguous ids and build the panel. Labels that all
// parse as numbers are ordered numerically, otherwise lexicographically, so
// the dictionary is stable under record reordering.
//
// Throws EmptyInput and DuplicateObservation.
PanelIndex build_panel(const std::vector<Record>& records);

// Sort order used for label densification.
std::vector<std::string> sorted_labels(std::vector<std::string> labels);

}  // namespace peerpanel
