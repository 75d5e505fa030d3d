#include "peerpanel/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "peerpanel/errors.hpp"

namespace peerpanel {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, Index lineno, const std::string& source)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(source + ", line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string trim(std::string s)
{
  const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

// Lines without their terminator, CR stripped; skips blank lines.
bool next_line(std::istream& in, std::string& line, Index& lineno)
{
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) return true;
  }
  return false;
}

std::string where(const std::string& source, Index lineno)
{
  return source + ", line " + std::to_string(lineno) + ": ";
}

Json vec(const VectorXd& v)
{
  Json a = Json::array();
  for (Index k = 0; k < v.size(); ++k) a.push_back(std::isfinite(v[k]) ? Json(v[k]) : Json(nullptr));
  return a;
}

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

std::string fixed(double x, int digits)
{
  if (!std::isfinite(x)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string cell_label(const McConfig& c)
{
  std::ostringstream os;
  os << "CE=" << (c.correlated_effects ? "Yes" : "No") << ";T=" << c.T << ";p=" << format_double(c.p)
     << ";N=" << c.N << ";M=" << c.M;
  return os.str();
}

std::string kind_label(NetworkKind k)
{
  switch (k) {
    case NetworkKind::lim: return "LIM";
    case NetworkKind::liom: return "LIOM";
    case NetworkKind::pliom: return "PLIOM";
    case NetworkKind::social: return "SOC";
    case NetworkKind::custom: return "CUSTOM";
  }
  return "?";
}

struct TableLayout {
  std::vector<std::string> cells;
  std::vector<NetworkKind> kinds;
  std::map<std::pair<int, std::string>, const McResult*> at;
  std::vector<const McResult*> cell_config;
};

TableLayout layout(const std::vector<McResult>& results)
{
  TableLayout L;
  for (const McResult& r : results) {
    const std::string c = cell_label(r.config);
    if (std::find(L.cells.begin(), L.cells.end(), c) == L.cells.end()) {
      L.cells.push_back(c);
      L.cell_config.push_back(&r);
    }
    if (std::find(L.kinds.begin(), L.kinds.end(), r.config.network_kind) == L.kinds.end())
      L.kinds.push_back(r.config.network_kind);
    L.at[{static_cast<int>(r.config.network_kind), c}] = &r;
  }
  return L;
}

std::string pad(const std::string& s, std::size_t w, bool left = false)
{
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

std::string render(const std::vector<std::vector<std::string>>& rows)
{
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) line += "  ";
      line += pad(r[c], width[c], c == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

template <class T>
T get_as(const Json& v, const std::string& key)
{
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw ConfigViolation("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string format_double(double x)
{
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text)
{
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty number");
  const char* b = t.data();
  const char* e = b + t.size();
  if (*b == '+') ++b;
  double x = 0.0;
  const auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) throw ParseError("not a number: '" + t + "'");
  if (!std::isfinite(x)) throw ParseError("not a finite number: '" + t + "'");
  return x;
}

PanelData read_panel_csv(std::istream& in, const CsvOptions& opts, const std::string& source)
{
  std::string line;
  Index lineno = 0;
  if (!next_line(in, line, lineno)) throw EmptyInput(source + ": no header row");
  const std::vector<std::string> header = split_csv_line(line, lineno, source);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (h.empty()) throw ParseError(where(source, lineno) + "empty column name");
    if (!col.emplace(h, c).second) throw ParseError(where(source, lineno) + "duplicate column '" + h + "'");
  }
  for (const char* req : {"individual", "period", "group"})
    if (!col.count(req)) throw ParseError(where(source, lineno) + "missing required column '" + req + "'");
  PanelData d;
  d.has_outcome = col.count("outcome") > 0;
  if (opts.require_outcome && !d.has_outcome)
    throw ParseError(where(source, lineno) + "missing required column 'outcome'");
  std::vector<std::size_t> cov_cols;
  for (const std::string& name : opts.covariates) {
    auto it = col.find(name);
    if (it == col.end()) throw ParseError(where(source, lineno) + "declared covariate '" + name + "' not in header");
    cov_cols.push_back(it->second);
    d.covariate_names.push_back(name);
  }
  std::set<std::string> known = {"individual", "period", "group", "outcome"};
  known.insert(opts.covariates.begin(), opts.covariates.end());
  std::vector<std::size_t> extra_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (known.count(h)) continue;
    if (opts.strict) throw ParseError(where(source, lineno) + "unknown column '" + h + "' (strict mode)");
    extra_cols.push_back(c);
    d.extra_names.push_back(h);
  }

  while (next_line(in, line, lineno)) {
    const std::vector<std::string> f = split_csv_line(line, lineno, source);
    if (f.size() != header.size())
      throw ParseError(where(source, lineno) + "expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(f.size()));
    Record r{trim(f[col["individual"]]), trim(f[col["period"]]), trim(f[col["group"]])};
    if (r.individual.empty() || r.period.empty() || r.group.empty())
      throw ParseError(where(source, lineno) + "empty individual, period or group");
    d.records.push_back(std::move(r));
    try {
      if (d.has_outcome) d.outcome.push_back(parse_double(f[col["outcome"]]));
      std::vector<double> cv;
      for (std::size_t c : cov_cols) cv.push_back(parse_double(f[c]));
      d.covariates.push_back(std::move(cv));
    } catch (const ParseError& e) {
      throw ParseError(where(source, lineno) + e.what());
    }
    std::vector<std::string> ex;
    for (std::size_t c : extra_cols) ex.push_back(f[c]);
    d.extra.push_back(std::move(ex));
  }
  if (d.records.empty()) throw EmptyInput(source + ": no data rows");
  return d;
}

PanelData read_panel_csv_file(const std::string& path, const CsvOptions& opts)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_panel_csv(in, opts, path);
}

void write_panel_csv(std::ostream& out, const PanelData& d)
{
  out << "individual,period,group";
  if (d.has_outcome) out << ",outcome";
  for (const auto& n : d.covariate_names) out << ',' << csv_field(n);
  for (const auto& n : d.extra_names) out << ',' << csv_field(n);
  out << '\n';
  for (std::size_t k = 0; k < d.records.size(); ++k) {
    const Record& r = d.records[k];
    out << csv_field(r.individual) << ',' << csv_field(r.period) << ',' << csv_field(r.group);
    if (d.has_outcome) out << ',' << format_double(d.outcome[k]);
    if (k < d.covariates.size())
      for (double v : d.covariates[k]) out << ',' << format_double(v);
    if (k < d.extra.size())
      for (const auto& v : d.extra[k]) out << ',' << csv_field(v);
    out << '\n';
  }
}

LoadedPanel assemble(const PanelData& d)
{
  LoadedPanel L;
  L.panel = build_panel(d.records);
  const Index R = L.panel.num_rows();
  const Index K = static_cast<Index>(d.covariate_names.size());
  L.covariate_names = d.covariate_names;
  if (d.has_outcome) L.y.resize(R);
  L.X.resize(R, K);
  for (std::size_t k = 0; k < d.records.size(); ++k) {
    const Record& rec = d.records[k];
    const Index r = L.panel.row_of(L.panel.individual_id(rec.individual), L.panel.period_id(rec.period));
    if (d.has_outcome) L.y[r] = d.outcome[k];
    for (Index c = 0; c < K; ++c) L.X(r, c) = d.covariates[k][static_cast<std::size_t>(c)];
  }
  return L;
}

PanelData panel_data(const PanelIndex& panel, const VectorXd& y)
{
  PanelData d;
  d.has_outcome = y.size() > 0;
  if (d.has_outcome && y.size() != panel.num_rows()) throw DimensionMismatch("outcome length");
  const auto& il = panel.individual_labels();
  const auto& pl = panel.period_labels();
  const auto& gl = panel.group_labels();
  for (Index r = 0; r < panel.num_rows(); ++r) {
    const Observation& o = panel.row(r);
    d.records.push_back({il[o.individual], pl[o.period], gl[o.group]});
    if (d.has_outcome) d.outcome.push_back(y[r]);
  }
  return d;
}

std::vector<Record> example_records(int which)
{
  if (which == 1) return {{"1", "1", "1"}, {"2", "1", "2"}, {"1", "2", "1"}, {"2", "2", "1"}};
  if (which == 2) return {{"1", "1", "1"}, {"2", "1", "2"}, {"1", "2", "2"}, {"2", "2", "1"}};
  throw ConfigViolation("unknown example " + std::to_string(which) + " (expected 1 or 2)");
}

std::vector<Edge> read_edges_csv(std::istream& in, const PanelIndex& panel, const std::string& source)
{
  std::string line;
  Index lineno = 0;
  if (!next_line(in, line, lineno)) throw EmptyInput(source + ": no header row");
  const std::vector<std::string> header = split_csv_line(line, lineno, source);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[trim(header[c])] = c;
  for (const char* req : {"period", "i", "j", "weight"})
    if (!col.count(req)) throw ParseError(where(source, lineno) + "missing required column '" + req + "'");
  if (col.size() != 4 || header.size() != 4) throw ParseError(where(source, lineno) + "expected columns period,i,j,weight");
  std::vector<Edge> edges;
  while (next_line(in, line, lineno)) {
    const std::vector<std::string> f = split_csv_line(line, lineno, source);
    if (f.size() != 4) throw ParseError(where(source, lineno) + "expected 4 fields");
    try {
      Edge e;
      e.period = panel.period_id(trim(f[col["period"]]));
      e.from = panel.individual_id(trim(f[col["i"]]));
      e.to = panel.individual_id(trim(f[col["j"]]));
      e.weight = parse_double(f[col["weight"]]);
      if (e.period < 0) throw ParseError("unknown period '" + trim(f[col["period"]]) + "'");
      if (e.from < 0) throw ParseError("unknown individual '" + trim(f[col["i"]]) + "'");
      if (e.to < 0) throw ParseError("unknown individual '" + trim(f[col["j"]]) + "'");
      edges.push_back(e);
    } catch (const Error& e) {
      throw ParseError(where(source, lineno) + e.what());
    }
  }
  return edges;
}

std::vector<Edge> read_edges_csv_file(const std::string& path, const PanelIndex& panel)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_edges_csv(in, panel, path);
}

void write_edges_csv(std::ostream& out, const Network& net, const PanelIndex& panel)
{
  out << "period,i,j,weight\n";
  const auto& il = panel.individual_labels();
  const auto& pl = panel.period_labels();
  for (const Edge& e : to_edges(net))
    out << csv_field(pl[e.period]) << ',' << csv_field(il[e.from]) << ',' << csv_field(il[e.to]) << ','
        << format_double(e.weight) << '\n';
}

PanelData apply_filters(const PanelData& data, const PanelFilters& f, FilterReport* report)
{
  std::vector<std::size_t> cov_index;
  for (const auto& [name, value] : f.min_value) {
    auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), name);
    if (it == data.covariate_names.end())
      throw ConfigViolation("filter column '" + name + "' is not a declared covariate");
    cov_index.push_back(static_cast<std::size_t>(it - data.covariate_names.begin()));
  }
  std::vector<char> keep(data.records.size(), 1);
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (std::size_t c = 0; c < cov_index.size(); ++c)
      if (!(data.covariates[k][cov_index[c]] >= f.min_value[c].second)) keep[k] = 0;
  Index passes = 0;
  for (bool changed = true; changed;) {
    changed = false;
    ++passes;
    std::map<std::string, Index> obs;
    std::map<std::pair<std::string, std::string>, Index> cell;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (!keep[k]) continue;
      ++obs[data.records[k].individual];
      ++cell[{data.records[k].group, data.records[k].period}];
    }
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (!keep[k]) continue;
      const Record& r = data.records[k];
      if (obs[r.individual] < f.min_obs || cell[{r.group, r.period}] < f.min_group_size) {
        keep[k] = 0;
        changed = true;
      }
    }
  }
  PanelData out;
  out.has_outcome = data.has_outcome;
  out.covariate_names = data.covariate_names;
  out.extra_names = data.extra_names;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (!keep[k]) continue;
    out.records.push_back(data.records[k]);
    if (data.has_outcome) out.outcome.push_back(data.outcome[k]);
    if (k < data.covariates.size()) out.covariates.push_back(data.covariates[k]);
    if (k < data.extra.size()) out.extra.push_back(data.extra[k]);
  }
  if (report) *report = {passes, static_cast<Index>(data.records.size()), static_cast<Index>(out.records.size())};
  if (out.records.empty()) throw EmptyInput("filters removed every record");
  return out;
}

std::string sha256_hex(const std::string& bytes)
{
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

void write_file(const std::string& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

Json to_json(const RunConfig& c)
{
  Json j;
  j["panel"] = c.panel;
  j["edges"] = c.edges;
  j["out_dir"] = c.out_dir;
  j["network"] = c.network;
  j["fe"] = c.fe;
  j["force"] = c.force;
  j["endogenous"] = c.endogenous;
  j["lenient"] = c.lenient;
  j["covariates"] = c.covariates;
  j["peer_covariates"] = c.peer_covariates;
  j["mu_alpha"] = c.mu_alpha ? Json(*c.mu_alpha) : Json(nullptr);
  j["rho"] = c.rho;
  j["psi_plus_rho"] = c.psi_plus_rho ? Json(*c.psi_plus_rho) : Json(nullptr);
  j["rho_lo"] = c.rho_lo;
  j["rho_hi"] = c.rho_hi;
  j["grid_points"] = c.grid_points;
  j["refine_tol"] = c.refine_tol;
  j["bootstrap"] = c.bootstrap;
  j["cluster"] = c.cluster;
  j["seed"] = c.seed;
  j["links_per_person"] = c.links_per_person;
  Json mv = Json::object();
  for (const auto& [k, v] : c.filters.min_value) mv[k] = v;
  j["filters"] = {{"min_obs", c.filters.min_obs}, {"min_group_size", c.filters.min_group_size}, {"min_value", mv}};
  j["example"] = c.example;
  j["scale"] = c.scale;
  j["N"] = c.N;
  j["M"] = c.M;
  j["T"] = c.T;
  j["p"] = c.p;
  j["rho_true"] = c.rho_true;
  j["psi_true"] = c.psi_true;
  j["eps_variance"] = c.eps_variance;
  j["correlated_effects"] = c.correlated_effects;
  j["replications"] = c.replications;
  j["grid"] = c.grid;
  return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig c)
{
  if (!j.is_object()) throw ConfigViolation("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "panel") c.panel = get_as<std::string>(v, key);
    else if (key == "edges") c.edges = get_as<std::string>(v, key);
    else if (key == "out_dir") c.out_dir = get_as<std::string>(v, key);
    else if (key == "network") c.network = get_as<std::string>(v, key);
    else if (key == "fe") c.fe = v.is_string() ? std::vector<std::string>{v.get<std::string>()} : get_as<std::vector<std::string>>(v, key);
    else if (key == "force") c.force = get_as<bool>(v, key);
    else if (key == "endogenous") c.endogenous = get_as<bool>(v, key);
    else if (key == "lenient") c.lenient = get_as<bool>(v, key);
    else if (key == "covariates") c.covariates = get_as<std::vector<std::string>>(v, key);
    else if (key == "peer_covariates") c.peer_covariates = get_as<bool>(v, key);
    else if (key == "mu_alpha") c.mu_alpha = v.is_null() ? std::nullopt : std::optional(get_as<std::vector<double>>(v, key));
    else if (key == "rho") c.rho = get_as<double>(v, key);
    else if (key == "psi_plus_rho") c.psi_plus_rho = v.is_null() ? std::nullopt : std::optional(get_as<double>(v, key));
    else if (key == "rho_lo") c.rho_lo = get_as<double>(v, key);
    else if (key == "rho_hi") c.rho_hi = get_as<double>(v, key);
    else if (key == "grid_points") c.grid_points = get_as<Index>(v, key);
    else if (key == "refine_tol") c.refine_tol = get_as<double>(v, key);
    else if (key == "bootstrap") c.bootstrap = get_as<Index>(v, key);
    else if (key == "cluster") c.cluster = get_as<std::string>(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "links_per_person") c.links_per_person = get_as<Index>(v, key);
    else if (key == "filters") {
      if (!v.is_object()) throw ConfigViolation("config key 'filters' must be an object");
      for (const auto& [fk, fv] : v.items()) {
        if (fk == "min_obs") c.filters.min_obs = get_as<Index>(fv, fk);
        else if (fk == "min_group_size") c.filters.min_group_size = get_as<Index>(fv, fk);
        else if (fk == "min_value") {
          c.filters.min_value.clear();
          for (const auto& [col, val] : get_as<std::map<std::string, double>>(fv, fk)) c.filters.min_value.emplace_back(col, val);
        } else throw ConfigViolation("unknown filter key '" + fk + "'");
      }
    }
    else if (key == "example") c.example = get_as<int>(v, key);
    else if (key == "scale") c.scale = get_as<std::string>(v, key);
    else if (key == "N") c.N = get_as<Index>(v, key);
    else if (key == "M") c.M = get_as<Index>(v, key);
    else if (key == "T") c.T = get_as<Index>(v, key);
    else if (key == "p") c.p = get_as<double>(v, key);
    else if (key == "rho_true") c.rho_true = get_as<double>(v, key);
    else if (key == "psi_true") c.psi_true = get_as<double>(v, key);
    else if (key == "eps_variance") c.eps_variance = get_as<double>(v, key);
    else if (key == "correlated_effects") c.correlated_effects = get_as<bool>(v, key);
    else if (key == "replications") c.replications = get_as<Index>(v, key);
    else if (key == "grid") c.grid = get_as<bool>(v, key);
    else throw ConfigViolation("unknown config key '" + key + "'");
  }
  return c;
}

NetworkKind network_kind(const RunConfig& c) { return network_kind_from_string(c.network); }

FixedEffects fe_mode(const RunConfig& c)
{
  FixedEffects mode = FixedEffects::group;
  for (const std::string& f : c.fe) {
    if (f == "group-period") mode = FixedEffects::group_period;
    else if (f != "group" && f != "period" && f != "none") throw ConfigViolation("unknown --fe value '" + f + "'");
  }
  return mode;
}

bool period_fe(const RunConfig& c) { return std::find(c.fe.begin(), c.fe.end(), "period") != c.fe.end(); }

FitOptions fit_options(const RunConfig& c)
{
  fe_mode(c);
  FitOptions o;
  o.rho_lo = c.rho_lo;
  o.rho_hi = c.rho_hi;
  o.grid_points = c.grid_points;
  o.refine_tol = c.refine_tol;
  const bool none = std::find(c.fe.begin(), c.fe.end(), "none") != c.fe.end();
  o.include_group_fe = !none && (std::find(c.fe.begin(), c.fe.end(), "group") != c.fe.end() ||
                                 std::find(c.fe.begin(), c.fe.end(), "group-period") != c.fe.end());
  o.include_period_fe = period_fe(c);
  o.peer_covariates = c.peer_covariates;
  o.bootstrap_reps = c.bootstrap;
  if (c.cluster == "observation") o.bootstrap_cluster = BootstrapCluster::observation;
  else if (c.cluster == "individual") o.bootstrap_cluster = BootstrapCluster::individual;
  else throw ConfigViolation("unknown --cluster value '" + c.cluster + "'");
  o.seed = c.seed;
  o.force = c.force;
  return o;
}

McConfig mc_config(const RunConfig& c)
{
  McConfig m;
  if (c.scale == "desk") m = McConfig::desk();
  else if (c.scale == "full") m = McConfig::full();
  else if (c.scale != "custom") throw ConfigViolation("unknown --scale value '" + c.scale + "'");
  if (c.scale == "custom") {
    m.N = c.N;
    m.M = c.M;
    m.replications = c.replications;
  }
  m.T = c.T;
  m.p = c.p;
  m.rho_true = c.rho_true;
  m.psi_true = c.psi_true;
  m.eps_variance = c.eps_variance;
  m.correlated_effects = c.correlated_effects;
  m.network_kind = network_kind(c);
  m.seed = c.seed;
  m.links_per_person = c.links_per_person;
  m.rho_lo = c.rho_lo;
  m.rho_hi = c.rho_hi;
  m.grid_points = c.grid_points;
  m.refine_tol = c.refine_tol;
  return m;
}

Json to_json(const RankInfo& r)
{
  return {{"rank", r.rank},
          {"threshold", num(r.threshold)},
          {"sigma_above", num(r.sigma_above)},
          {"sigma_below", num(r.sigma_below)},
          {"method", r.method}};
}

Json to_json(const IdentificationReport& r)
{
  Json j;
  j["individuals"] = r.num_individuals;
  j["groups"] = r.num_groups;
  j["periods"] = r.num_periods;
  j["rows"] = r.num_rows;
  j["overall"] = to_string(r.overall());
  j["nullspace_dim"] = r.nullspace_dim;
  j["cor2"] = {{"verdict", to_string(r.cor2.verdict)},
               {"rank", to_json(r.cor2.rank)},
               {"expected_rank", r.cor2.expected_rank},
               {"rows_sum_to_one", r.cor2.rows_sum_to_one},
               {"mu_varies", r.cor2.mu_varies ? Json(*r.cor2.mu_varies) : Json(nullptr)},
               {"evidence", r.cor2.evidence}};
  j["cor3"] = {{"verdict", to_string(r.cor3.verdict)},
               {"rank", to_json(r.cor3.rank)},
               {"required", r.cor3.required},
               {"evidence", r.cor3.evidence}};
  if (r.prop1) {
    const Prop1Result& p = *r.prop1;
    Json q = {{"verdict", to_string(p.verdict)},  {"rank", to_json(p.rank)},
              {"null_dim", p.null_basis.cols()},   {"min_residual", num(p.min_residual)},
              {"tolerance", num(p.tolerance)},     {"lambda", num(p.lambda)},
              {"evidence", p.evidence}};
    if (p.has_witness)
      q["witness"] = {{"v1", vec(p.v1)},         {"v2", vec(p.v2)},       {"rho_bar", num(p.rho_bar)},
                      {"mu_bar", vec(p.mu_bar)}, {"gamma_shift", vec(p.gamma_shift)}};
    j["prop1"] = q;
  }
  if (r.endo)
    j["endogenous"] = {{"verdict", to_string(r.endo->verdict)},
                       {"rank", to_json(r.endo->rank)},
                       {"required", r.endo->required},
                       {"h_equals_g", r.endo->h_equals_g},
                       {"evidence", r.endo->evidence}};
  if (r.prop2y) {
    Json ind = Json::array();
    for (bool b : r.prop2y->independence.independent) ind.push_back(b);
    j["variance_lim"] = {{"verdict", to_string(r.prop2y->verdict)},
                         {"route", r.prop2y->route},
                         {"independent", ind},
                         {"rank", to_json(r.prop2y->independence.rank)},
                         {"evidence", r.prop2y->evidence}};
  }
  if (r.prop3y) {
    Json groups = Json::array();
    for (const Prop3Group& g : r.prop3y->groups) {
      Json ind = Json::array();
      for (bool b : g.independent) ind.push_back(b);
      groups.push_back({{"group", g.group + 1},
                        {"rows_in", g.rows_in},
                        {"passes", g.passes},
                        {"zero_blocks", g.zero_blocks},
                        {"independent", ind}});
    }
    j["variance_general"] = {{"verdict", to_string(r.prop3y->verdict)},
                             {"psi_plus_rho", r.prop3y->psi_plus_rho ? Json(*r.prop3y->psi_plus_rho) : Json(nullptr)},
                             {"groups", groups},
                             {"evidence", r.prop3y->evidence}};
  }
  j["notes"] = r.notes;
  return j;
}

Json to_json(const EstimationResult& r)
{
  Json j;
  j["rho_hat"] = num(r.rho_hat);
  j["se_rho"] = num(r.se_rho);
  j["sigma_alpha_hat"] = num(r.sigma_alpha_hat);
  j["mean_row_norm"] = num(r.mean_row_norm);
  j["avg_row_norm_effect"] = num(r.avg_row_norm_effect);
  j["pp_effect"] = num(r.pp_effect);
  j["ssr"] = num(r.ssr);
  j["alpha_hat"] = vec(r.alpha_hat);
  j["gamma_hat"] = vec(r.gamma_hat);
  j["period_fe_hat"] = vec(r.period_fe_hat);
  j["beta_hat"] = vec(r.beta_hat);
  j["rho1_hat"] = vec(r.rho1_hat);
  j["bootstrap"] = {{"replicates", r.bootstrap_draws.size()}, {"failures", r.bootstrap_failures}};
  j["flags"] = r.flags;
  j["deficiency_dim"] = r.deficiency_dim;
  j["cor3_rank"] = r.cor3_rank;
  j["evaluations"] = r.evaluations;
  Json prof = Json::array();
  for (const auto& [rho, ssr] : r.profile) prof.push_back({num(rho), num(ssr)});
  j["profile"] = prof;
  return j;
}

Json to_json(const McConfig& c)
{
  return {{"N", c.N},
          {"M", c.M},
          {"T", c.T},
          {"p", c.p},
          {"rho_true", c.rho_true},
          {"psi_true", c.psi_true},
          {"network", to_string(c.network_kind)},
          {"correlated_effects", c.correlated_effects},
          {"eps_variance", c.eps_variance},
          {"replications", c.replications},
          {"seed", c.seed},
          {"links_per_person", c.links_per_person},
          {"rho_lo", c.rho_lo},
          {"rho_hi", c.rho_hi},
          {"grid_points", c.grid_points},
          {"refine_tol", c.refine_tol}};
}

Json to_json(const McResult& r)
{
  auto stats = [](const CellStats& s) {
    return Json{{"count", s.count}, {"failures", s.failures}, {"mean", num(s.mean)}, {"sd", num(s.sd)}};
  };
  Json recs = Json::array();
  for (const ReplicationRecord& x : r.records)
    recs.push_back({{"replication", x.replication},
                    {"rho_nls", x.nls_ok ? num(x.rho_nls) : Json(nullptr)},
                    {"rho_ols", x.ols_ok ? num(x.rho_ols) : Json(nullptr)},
                    {"cor3", to_string(x.cor3)},
                    {"cor3_rank", x.cor3_rank},
                    {"flags", x.flags},
                    {"mover_rate", num(x.mover_rate)},
                    {"self_moves", x.self_moves},
                    {"effect_ratio", num(x.effect_ratio)},
                    {"error", x.error}});
  return {{"config", to_json(r.config)},
          {"nls", stats(r.nls)},
          {"ols", stats(r.ols)},
          {"cor3_failures", r.cor3_failures},
          {"mean_mover_rate", num(r.mean_mover_rate)},
          {"mean_effect_ratio", num(r.mean_effect_ratio)},
          {"records", recs}};
}

Json artifact(const std::string& command, const RunConfig& config,
              const std::vector<std::pair<std::string, std::string>>& input_hashes, Json result)
{
  Json inputs = Json::object();
  for (const auto& [path, hash] : input_hashes) inputs[path] = hash;
  return {{"tool", kToolName},
          {"version", kVersion},
          {"command", command},
          {"config", to_json(config)},
          {"inputs", inputs},
          {"result", std::move(result)}};
}

void write_table1_csv(std::ostream& out, const std::vector<McResult>& results)
{
  const TableLayout L = layout(results);
  out << "network,estimator,statistic";
  for (const auto& c : L.cells) out << ',' << csv_field(c);
  out << '\n';
  std::vector<std::string> notes;
  for (NetworkKind k : L.kinds)
    for (const char* est : {"unobserved_alpha", "observed_alpha"}) {
      const bool nls = std::string(est) == "unobserved_alpha";
      for (const char* stat : {"mean", "sd"}) {
        out << kind_label(k) << ',' << est << ',' << stat;
        for (const auto& c : L.cells) {
          auto it = L.at.find({static_cast<int>(k), c});
          out << ',';
          if (it == L.at.end()) continue;
          const CellStats& s = nls ? it->second->nls : it->second->ols;
          out << format_double(std::string(stat) == "mean" ? s.mean : s.sd);
          if (std::string(stat) == "mean" && s.failures > 0)
            notes.push_back(kind_label(k) + " " + est + " " + c + ": " + std::to_string(s.failures) + " of " +
                            std::to_string(it->second->config.replications) + " replications failed");
        }
        out << '\n';
      }
    }
  auto footer = [&](const std::string& name, auto value) {
    out << csv_field(name) << ",,";
    for (const McResult* r : L.cell_config) out << ',' << value(r->config);
    out << '\n';
  };
  footer("Correlated Effects", [](const McConfig& c) { return std::string(c.correlated_effects ? "Yes" : "No"); });
  footer("Periods", [](const McConfig& c) { return std::to_string(c.T); });
  footer("Mobility Rate (p)", [](const McConfig& c) { return format_double(c.p); });
  footer("Individuals", [](const McConfig& c) { return std::to_string(c.N); });
  footer("Groups", [](const McConfig& c) { return std::to_string(c.M); });
  footer("Replications", [](const McConfig& c) { return std::to_string(c.replications); });
  for (const McResult& r : results)
    if (r.cor3_failures > 0)
      notes.push_back(kind_label(r.config.network_kind) + " " + cell_label(r.config) + ": " +
                      std::to_string(r.cor3_failures) + " datasets failed the generic rank condition");
  for (const auto& n : notes) out << "# " << n << '\n';
}

std::string identify_table(const IdentificationReport& r)
{
  std::vector<std::vector<std::string>> rows = {{"check", "verdict", "rank", "required", "detail"}};
  rows.push_back({"rank [J,G,D]", to_string(r.cor2.verdict), std::to_string(r.cor2.rank.rank),
                  std::to_string(r.cor2.expected_rank), r.cor2.evidence});
  rows.push_back({"rank [WJ,WG]", to_string(r.cor3.verdict), std::to_string(r.cor3.rank.rank),
                  std::to_string(r.cor3.required), r.cor3.evidence});
  if (r.prop1)
    rows.push_back({"mean restriction", to_string(r.prop1->verdict), std::to_string(r.prop1->rank.rank), "",
                    r.prop1->evidence});
  if (r.endo)
    rows.push_back({"rank [WJ,WG,WH]", to_string(r.endo->verdict), std::to_string(r.endo->rank.rank),
                    std::to_string(r.endo->required), r.endo->evidence});
  if (r.prop2y)
    rows.push_back({"variance (LIM)", to_string(r.prop2y->verdict), std::to_string(r.prop2y->independence.rank.rank),
                    "", r.prop2y->evidence});
  if (r.prop3y) rows.push_back({"variance (groups)", to_string(r.prop3y->verdict), "", "", r.prop3y->evidence});
  std::string out = "N=" + std::to_string(r.num_individuals) + " M=" + std::to_string(r.num_groups) +
                    " T=" + std::to_string(r.num_periods) + " rows=" + std::to_string(r.num_rows) + "\n";
  out += render(rows);
  out += "overall: " + to_string(r.overall()) + "\n";
  for (const auto& n : r.notes) out += "note: " + n + "\n";
  return out;
}

std::string estimate_table(const EstimationResult& r)
{
  std::vector<std::vector<std::string>> rows = {{"statistic", "value"}};
  rows.push_back({"rho_hat", format_double(r.rho_hat)});
  rows.push_back({"se (wild bootstrap)", format_double(r.se_rho)});
  rows.push_back({"sigma_alpha", format_double(r.sigma_alpha_hat)});
  rows.push_back({"rho * mean row norm", format_double(r.avg_row_norm_effect)});
  rows.push_back({"rho * sigma_alpha * mean row norm", format_double(r.pp_effect)});
  rows.push_back({"SSR", format_double(r.ssr)});
  for (Index k = 0; k < r.beta_hat.size(); ++k) rows.push_back({"beta[" + std::to_string(k + 1) + "]", format_double(r.beta_hat[k])});
  for (Index k = 0; k < r.rho1_hat.size(); ++k) rows.push_back({"rho1[" + std::to_string(k + 1) + "]", format_double(r.rho1_hat[k])});
  std::string out = render(rows);
  for (const auto& f : r.flags) out += "flag: " + f + "\n";
  return out;
}

std::string montecarlo_table(const std::vector<McResult>& results)
{
  const TableLayout L = layout(results);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"", ""};
  for (std::size_t c = 0; c < L.cells.size(); ++c) head.push_back("(" + std::to_string(c + 1) + ")");
  rows.push_back(head);
  for (const char* est : {"unobserved alpha", "observed alpha"})
    for (NetworkKind k : L.kinds) {
      std::vector<std::string> m = {kind_label(k), est}, s = {"", ""};
      for (const auto& c : L.cells) {
        auto it = L.at.find({static_cast<int>(k), c});
        if (it == L.at.end()) {
          m.push_back("");
          s.push_back("");
          continue;
        }
        const CellStats& st = std::string(est) == "unobserved alpha" ? it->second->nls : it->second->ols;
        m.push_back(fixed(st.mean, 3));
        s.push_back("(" + fixed(st.sd, 3) + ")");
      }
      rows.push_back(m);
      rows.push_back(s);
    }
  std::string out = render(rows);
  for (std::size_t c = 0; c < L.cells.size(); ++c) out += "(" + std::to_string(c + 1) + ") " + L.cells[c] + "\n";
  return out;
}

}  // namespace peerpanel
