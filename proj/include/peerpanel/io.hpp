#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "peerpanel/estimation.hpp"
#include "peerpanel/identification.hpp"
#include "peerpanel/networks.hpp"
#include "peerpanel/panel.hpp"
#include "peerpanel/simulation.hpp"

namespace peerpanel {

using Json = nlohmann::json;

inline constexpr const char* kToolName = "peerpanel";
inline constexpr const char* kVersion = "1.0.0";

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
// Strict: the whole field must be a finite number. Throws ParseError.
double parse_double(const std::string& text);

// Panel CSV: header `individual,period,group,outcome` (any column order),
// plus declared covariate columns. Unknown columns are rejected in strict
// mode and carried through verbatim otherwise.
struct PanelData {
  std::vector<Record> records;
  bool has_outcome = false;
  std::vector<double> outcome;  // per record when has_outcome
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> covariates;  // [record][covariate]
  std::vector<std::string> extra_names;
  std::vector<std::vector<std::string>> extra;  // [record][extra column]
};

struct CsvOptions {
  bool strict = true;
  bool require_outcome = true;
  std::vector<std::string> covariates;
};

// Throws ParseError with the 1-based line number.
PanelData read_panel_csv(std::istream& in, const CsvOptions& opts = {}, const std::string& source = "<input>");
PanelData read_panel_csv_file(const std::string& path, const CsvOptions& opts = {});
void write_panel_csv(std::ostream& out, const PanelData& data);

// The panel plus outcome and covariates in stacked row order.
struct LoadedPanel {
  PanelIndex panel;
  VectorXd y;   // empty without an outcome column
  MatrixXd X;   // R x K
  std::vector<std::string> covariate_names;
};

LoadedPanel assemble(const PanelData& data);
// Records in stacked row order for a simulated or assembled panel.
PanelData panel_data(const PanelIndex& panel, const VectorXd& y);

// Built-in two-person fixtures: 1 = one mover joins the other's group,
// 2 = both swap groups. Records are (individual, period, group). Throws
// ConfigViolation for other numbers.
std::vector<Record> example_records(int which);

// Edge list CSV `period,i,j,weight` over the panel's labels.
std::vector<Edge> read_edges_csv(std::istream& in, const PanelIndex& panel, const std::string& source = "<input>");
std::vector<Edge> read_edges_csv_file(const std::string& path, const PanelIndex& panel);
void write_edges_csv(std::ostream& out, const Network& net, const PanelIndex& panel);

// Eligibility filters, applied together and repeated until nothing changes:
// individuals need at least min_obs records, (group, period) cells at least
// min_group_size members, and records need covariate >= value for each
// min_value entry.
struct PanelFilters {
  Index min_obs = 0;
  Index min_group_size = 0;
  std::vector<std::pair<std::string, double>> min_value;

  bool active() const { return min_obs > 0 || min_group_size > 0 || !min_value.empty(); }
};

struct FilterReport {
  Index passes = 0;
  Index records_in = 0;
  Index records_out = 0;
};

PanelData apply_filters(const PanelData& data, const PanelFilters& filters, FilterReport* report = nullptr);

std::string sha256_hex(const std::string& bytes);
// Throws IoError.
std::string sha256_file(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Every option of every subcommand, with defaults; echoed into artifacts.
struct RunConfig {
  std::string panel;
  std::string edges;
  std::string out_dir = ".";
  std::string network = "lim";
  std::vector<std::string> fe = {"group"};
  bool force = false;
  bool endogenous = false;
  bool lenient = false;
  std::vector<std::string> covariates;
  bool peer_covariates = false;
  std::optional<std::vector<double>> mu_alpha;
  double rho = 0.0;  // point at which a non-identification witness is built
  std::optional<double> psi_plus_rho;
  double rho_lo = -2.0;
  double rho_hi = 2.0;
  Index grid_points = 201;
  double refine_tol = 1e-9;
  Index bootstrap = 200;
  std::string cluster = "observation";
  std::uint64_t seed = 1;
  Index links_per_person = 2;
  PanelFilters filters;
  int example = 0;
  // simulate / montecarlo
  std::string scale = "desk";
  Index N = 700;  // simulate, and montecarlo at custom scale
  Index M = 140;
  Index T = 15;
  double p = 0.03;
  double rho_true = 0.5;
  double psi_true = 0.0;
  double eps_variance = 0.5;
  bool correlated_effects = false;
  Index replications = 500;  // custom scale only
  bool grid = false;  // montecarlo: run the full design grid, not one cell
};

Json to_json(const RunConfig& c);
// Overlays the keys present in j onto base. Throws ConfigViolation on
// unknown keys or wrong types.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

// Derived option sets. Throw ConfigViolation on unknown names.
FitOptions fit_options(const RunConfig& c);
McConfig mc_config(const RunConfig& c);
NetworkKind network_kind(const RunConfig& c);
FixedEffects fe_mode(const RunConfig& c);
bool period_fe(const RunConfig& c);

Json to_json(const RankInfo& r);
Json to_json(const IdentificationReport& r);
Json to_json(const EstimationResult& r);
Json to_json(const McConfig& c);
Json to_json(const McResult& r);

// {tool, version, command, config, inputs: {path: sha256}, result}.
Json artifact(const std::string& command, const RunConfig& config,
              const std::vector<std::pair<std::string, std::string>>& input_hashes, Json result);

// Rows: network kind x estimator; columns: the design cells in input order.
// Cells with failures are footnoted below the table.
void write_table1_csv(std::ostream& out, const std::vector<McResult>& cells);

std::string identify_table(const IdentificationReport& r);
std::string estimate_table(const EstimationResult& r);
std::string montecarlo_table(const std::vector<McResult>& cells);

}  // namespace peerpanel
