#include "peerpanel/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "peerpanel/errors.hpp"

namespace peerpanel {

namespace {

bool parse_number(const std::string& s, double& out)
{
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::unordered_map<std::string, Index> invert(const std::vector<std::string>& labels)
{
  std::unordered_map<std::string, Index> ids;
  for (std::size_t k = 0; k < labels.size(); ++k) ids.emplace(labels[k], static_cast<Index>(k));
  return ids;
}

std::vector<std::string> default_labels(Index n)
{
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) out.push_back(std::to_string(k + 1));
  return out;
}

Index lookup(const std::unordered_map<std::string, Index>& ids, const std::string& label)
{
  auto it = ids.find(label);
  return it == ids.end() ? -1 : it->second;
}

}  // namespace

std::vector<std::string> sorted_labels(std::vector<std::string> labels)
{
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::vector<double> values(labels.size());
  bool numeric = true;
  for (std::size_t k = 0; k < labels.size() && numeric; ++k)
    numeric = parse_number(labels[k], values[k]);
  if (numeric) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (std::size_t k : order) out.push_back(labels[k]);
    return out;
  }
  return labels;
}

PanelIndex PanelIndex::from_assignment(std::vector<std::vector<Index>> groups_by_period,
                                       Index num_groups)
{
  if (groups_by_period.empty() || groups_by_period.front().empty())
    throw EmptyInput("panel has no periods or no individuals");
  PanelIndex p;
  p.t_ = static_cast<Index>(groups_by_period.size());
  p.n_ = static_cast<Index>(groups_by_period.front().size());
  p.m_ = num_groups;
  for (const auto& period : groups_by_period)
    if (static_cast<Index>(period.size()) != p.n_)
      throw DimensionMismatch("every period must list all individuals (use -1 for absent)");

  p.group_ = std::move(groups_by_period);
  p.row_.assign(static_cast<std::size_t>(p.t_), std::vector<Index>(static_cast<std::size_t>(p.n_), -1));
  p.members_.assign(static_cast<std::size_t>(p.t_),
                    std::vector<std::vector<Index>>(static_cast<std::size_t>(p.m_)));
  p.period_offset_.assign(static_cast<std::size_t>(p.t_ + 1), 0);

  std::vector<bool> individual_seen(static_cast<std::size_t>(p.n_), false);
  std::vector<bool> group_seen(static_cast<std::size_t>(p.m_), false);
  for (Index t = 0; t < p.t_; ++t) {
    p.period_offset_[t] = static_cast<Index>(p.obs_.size());
    for (Index i = 0; i < p.n_; ++i) {
      const Index g = p.group_[t][i];
      if (g < 0) continue;
      if (g >= p.m_) throw DimensionMismatch("group id out of range");
      p.row_[t][i] = static_cast<Index>(p.obs_.size());
      p.obs_.push_back({i, t, g});
      p.members_[t][g].push_back(i);
      individual_seen[i] = true;
      group_seen[g] = true;
    }
  }
  p.period_offset_[p.t_] = static_cast<Index>(p.obs_.size());

  for (Index i = 0; i < p.n_; ++i)
    if (!individual_seen[i])
      throw InvalidPanel("individual " + std::to_string(i + 1) + " is never observed");
  for (Index m = 0; m < p.m_; ++m)
    if (!group_seen[m]) throw InvalidPanel("group " + std::to_string(m + 1) + " is never populated");

  p.set_labels(default_labels(p.n_), default_labels(p.t_), default_labels(p.m_));
  return p;
}

void PanelIndex::set_labels(std::vector<std::string> individuals, std::vector<std::string> periods,
                            std::vector<std::string> groups)
{
  if (static_cast<Index>(individuals.size()) != n_ || static_cast<Index>(periods.size()) != t_ ||
      static_cast<Index>(groups.size()) != m_)
    throw DimensionMismatch("label dictionary sizes do not match the panel");
  individual_labels_ = std::move(individuals);
  period_labels_ = std::move(periods);
  group_labels_ = std::move(groups);
  individual_ids_ = invert(individual_labels_);
  period_ids_ = invert(period_labels_);
  group_ids_ = invert(group_labels_);
}

Index PanelIndex::individual_id(const std::string& label) const
{
  return lookup(individual_ids_, label);
}
Index PanelIndex::period_id(const std::string& label) const { return lookup(period_ids_, label); }
Index PanelIndex::group_id(const std::string& label) const { return lookup(group_ids_, label); }

PanelIndex build_panel(const std::vector<Record>& records)
{
  if (records.empty()) throw EmptyInput("no records");

  std::vector<std::string> individuals, periods, groups;
  individuals.reserve(records.size());
  periods.reserve(records.size());
  groups.reserve(records.size());
  for (const auto& r : records) {
    individuals.push_back(r.individual);
    periods.push_back(r.period);
    groups.push_back(r.group);
  }
  individuals = sorted_labels(std::move(individuals));
  periods = sorted_labels(std::move(periods));
  groups = sorted_labels(std::move(groups));
  const auto individual_ids = invert(individuals);
  const auto period_ids = invert(periods);
  const auto group_ids = invert(groups);

  std::vector<std::vector<Index>> assignment(periods.size(),
                                             std::vector<Index>(individuals.size(), -1));
  for (const auto& r : records) {
    const Index i = individual_ids.at(r.individual);
    const Index t = period_ids.at(r.period);
    Index& slot = assignment[t][i];
    if (slot >= 0)
      throw DuplicateObservation("individual '" + r.individual + "' in period '" + r.period + "'");
    slot = group_ids.at(r.group);
  }

  PanelIndex panel =
      PanelIndex::from_assignment(std::move(assignment), static_cast<Index>(groups.size()));
  panel.set_labels(std::move(individuals), std::move(periods), std::move(groups));
  return panel;
}

}  // namespace peerpanel
