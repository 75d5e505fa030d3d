#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "peerpanel/errors.hpp"
#include "peerpanel/io.hpp"

using namespace peerpanel;

namespace {

enum Exit { ok = 0, usage = 1, not_identified = 2, inconclusive = 3 };

struct Cli {
  RunConfig flags;
  std::string config_path;
  std::string output;
  bool json = false;
  std::vector<std::string> min_value;
  std::string mu_alpha;
  std::vector<std::string> groups;
  double psi_plus_rho = 0.0;
  Index replication = 0;
  std::vector<std::function<void(RunConfig&)>> overrides;

  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& desc)
  {
    CLI::Option* o = app->add_option(name, flags.*field, desc);
    overrides.push_back([this, o, field](RunConfig& c) {
      if (o->count()) c.*field = flags.*field;
    });
    return o;
  }

  void flag(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& desc)
  {
    CLI::Option* o = app->add_flag(name, flags.*field, desc);
    overrides.push_back([this, o, field](RunConfig& c) {
      if (o->count()) c.*field = flags.*field;
    });
  }
};

std::vector<double> parse_list(const std::string& text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw ConfigViolation("empty list");
  return out;
}

// defaults < PEERPANEL_SEED < --config file < explicit flags
RunConfig effective(Cli& cli, CLI::App* sub, std::vector<std::pair<std::string, std::string>>& hashes)
{
  RunConfig c;
  if (const char* env = std::getenv("PEERPANEL_SEED")) {
    try {
      c.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigViolation(std::string("PEERPANEL_SEED is not an unsigned integer: ") + env);
    }
  }
  if (!cli.config_path.empty()) {
    const std::string text = read_file(cli.config_path);
    hashes.emplace_back(cli.config_path, sha256_hex(text));
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(cli.config_path + ": " + e.what());
    }
    c = run_config_from_json(j, c);
  }
  for (auto& f : cli.overrides) f(c);
  if (sub->get_option_no_throw("--min-value") && sub->get_option("--min-value")->count()) {
    c.filters.min_value.clear();
    for (const std::string& mv : cli.min_value) {
      const auto eq = mv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigViolation("--min-value expects col=value, got '" + mv + "'");
      c.filters.min_value.emplace_back(mv.substr(0, eq), parse_double(mv.substr(eq + 1)));
    }
  }
  if (sub->get_option_no_throw("--mu-alpha") && sub->get_option("--mu-alpha")->count())
    c.mu_alpha = parse_list(cli.mu_alpha);
  if (sub->get_option_no_throw("--psi-plus-rho") && sub->get_option("--psi-plus-rho")->count())
    c.psi_plus_rho = cli.psi_plus_rho;
  return c;
}

void emit(const Cli& cli, const Json& art, const std::string& table)
{
  const std::string text = art.dump(2) + "\n";
  if (!cli.output.empty()) write_file(cli.output, text);
  std::cout << (cli.json ? text : table);
}

struct Loaded {
  LoadedPanel data;
  Network net;
  StackedDesign design;
  Json meta;
};

Loaded load(const RunConfig& c, bool need_outcome, std::vector<std::pair<std::string, std::string>>& hashes)
{
  Loaded L;
  PanelData pd;
  if (c.example != 0) {
    if (!c.panel.empty()) throw ConfigViolation("--example and --panel are mutually exclusive");
    pd.records = example_records(c.example);
  } else {
    if (c.panel.empty()) throw ConfigViolation("--panel is required");
    const std::string text = read_file(c.panel);
    hashes.emplace_back(c.panel, sha256_hex(text));
    std::istringstream in(text);
    CsvOptions o;
    o.strict = !c.lenient;
    o.require_outcome = need_outcome;
    o.covariates = c.covariates;
    pd = read_panel_csv(in, o, c.panel);
  }
  if (c.filters.active()) {
    FilterReport rep;
    pd = apply_filters(pd, c.filters, &rep);
    L.meta["filters"] = {{"passes", rep.passes}, {"records_in", rep.records_in}, {"records_out", rep.records_out}};
  }
  L.data = assemble(pd);
  if (!c.edges.empty()) {
    const std::string text = read_file(c.edges);
    hashes.emplace_back(c.edges, sha256_hex(text));
    std::istringstream in(text);
    L.net = from_edges(L.data.panel, read_edges_csv(in, L.data.panel, c.edges));
  } else {
    L.net = build_network(L.data.panel, network_kind(c), c.seed, c.links_per_person);
  }
  const auto violations = validate(L.net, L.data.panel);
  Json v = Json::array();
  for (const auto& x : violations)
    v.push_back({{"individual", L.data.panel.individual_labels()[x.individual]},
                 {"period", L.data.panel.period_labels()[x.period]},
                 {"what", x.what}});
  L.meta["network_violations"] = v;
  L.design = stack_design(L.data.panel, L.net, fe_mode(c), period_fe(c));
  L.meta["warnings"] = L.design.warnings;
  L.meta["network"] = to_string(L.net.kind);
  const PanelIndex& P = L.data.panel;
  L.meta["individuals"] = P.num_individuals();
  L.meta["groups"] = P.num_groups();
  L.meta["periods"] = P.num_periods();
  L.meta["rows"] = P.num_rows();
  L.meta["balanced"] = P.balanced();
  return L;
}

int exit_for(Verdict v)
{
  if (v == Verdict::not_identified) return not_identified;
  if (v == Verdict::inconclusive || v == Verdict::not_evaluated) return inconclusive;
  return ok;
}

int cmd_identify(Cli& cli, CLI::App* sub)
{
  std::vector<std::pair<std::string, std::string>> hashes;
  RunConfig c = effective(cli, sub, hashes);
  if (c.example != 0 && !c.mu_alpha) c.mu_alpha = std::vector<double>{1.0, 0.0};
  Loaded L = load(c, false, hashes);
  IdentifyOptions o;
  if (c.mu_alpha) o.mu_alpha = Eigen::Map<const VectorXd>(c.mu_alpha->data(), static_cast<Index>(c.mu_alpha->size()));
  o.rho = c.rho;
  o.endogenous = c.endogenous;
  o.psi_plus_rho = c.psi_plus_rho;
  for (const std::string& label : cli.groups) {
    const Index g = L.data.panel.group_id(label);
    if (g < 0) throw ConfigViolation("--groups: unknown group '" + label + "'");
    o.groups.push_back(g);
  }
  const IdentificationReport rep = identify(L.design, o);
  Json result = to_json(rep);
  result["design"] = L.meta;
  emit(cli, artifact("identify", c, hashes, result), identify_table(rep));
  // Exit code: the baseline verdict, or the worse of it and the endogenous
  // rank verdict; the variance checks are sufficient conditions and only
  // reported.
  int code = exit_for(rep.overall());
  if (rep.endo) {
    const int e = exit_for(rep.endo->verdict);
    if (e == not_identified)
      code = not_identified;
    else if (code == ok)
      code = e;
  }
  return code;
}

int cmd_estimate(Cli& cli, CLI::App* sub)
{
  std::vector<std::pair<std::string, std::string>> hashes;
  const RunConfig c = effective(cli, sub, hashes);
  Loaded L = load(c, true, hashes);
  if (L.data.y.size() == 0) throw ConfigViolation("estimation needs an outcome column");
  FitOptions o = fit_options(c);
  o.X = L.data.X;
  EstimationResult fit;
  try {
    fit = fit_nls(L.data.y, L.design, o);
  } catch (const NotIdentifiedRefusal& e) {
    std::cerr << e.what() << "\n";
    return not_identified;
  }
  Json result = to_json(fit);
  result["covariate_names"] = L.data.covariate_names;
  result["design"] = L.meta;
  emit(cli, artifact("estimate", c, hashes, result), estimate_table(fit));
  return ok;
}

int cmd_simulate(Cli& cli, CLI::App* sub)
{
  std::vector<std::pair<std::string, std::string>> hashes;
  const RunConfig c = effective(cli, sub, hashes);
  RunConfig custom = c;
  custom.scale = "custom";
  const McConfig m = mc_config(custom);
  SimulatedDataset d = simulate_dataset(m, cli.replication);
  std::filesystem::create_directories(c.out_dir);
  const std::filesystem::path dir(c.out_dir);
  std::ostringstream panel, edges;
  write_panel_csv(panel, panel_data(d.pattern.panel, d.y));
  write_edges_csv(edges, d.network, d.pattern.panel);
  write_file((dir / "panel.csv").string(), panel.str());
  write_file((dir / "edges.csv").string(), edges.str());
  Json truth = {{"rho", m.rho_true},
                {"psi", m.psi_true},
                {"network", to_string(m.network_kind)},
                {"replication", cli.replication},
                {"replication_seed", d.rep_seed},
                {"alpha", std::vector<double>(d.alpha.alpha.data(), d.alpha.alpha.data() + d.alpha.alpha.size())},
                {"move_share", std::vector<double>(d.alpha.move_share.data(), d.alpha.move_share.data() + d.alpha.move_share.size())},
                {"gamma", std::vector<double>(d.gamma.data(), d.gamma.data() + d.gamma.size())},
                {"mover_fraction", d.pattern.mover_fraction},
                {"self_moves", d.pattern.self_moves},
                {"files", {{"panel.csv", sha256_hex(panel.str())}, {"edges.csv", sha256_hex(edges.str())}}}};
  const Json art = artifact("simulate", c, hashes, truth);
  write_file((dir / "truth.json").string(), art.dump(2) + "\n");
  if (!cli.output.empty()) write_file(cli.output, art.dump(2) + "\n");
  std::cout << "wrote " << (dir / "panel.csv").string() << " (" << d.pattern.panel.num_rows() << " rows), "
            << (dir / "edges.csv").string() << ", " << (dir / "truth.json").string() << "\n";
  return ok;
}

int cmd_montecarlo(Cli& cli, CLI::App* sub)
{
  std::vector<std::pair<std::string, std::string>> hashes;
  const RunConfig c = effective(cli, sub, hashes);
  std::vector<McConfig> cells;
  const McConfig base = mc_config(c);
  if (c.grid) {
    for (NetworkKind k : {NetworkKind::lim, NetworkKind::liom, NetworkKind::pliom, NetworkKind::social})
      for (double p : {0.03, 0.1})
        for (Index T : {Index{15}, Index{2}})
          for (bool ce : {false, true}) {
            McConfig m = base;
            m.network_kind = k;
            m.p = p;
            m.T = T;
            m.correlated_effects = ce;
            cells.push_back(m);
          }
  } else {
    cells.push_back(base);
  }
  std::vector<McResult> results;
  for (const McConfig& m : cells) results.push_back(run_monte_carlo(m));
  std::ostringstream table;
  write_table1_csv(table, results);
  Json archive = Json::array();
  for (const McResult& r : results) archive.push_back(to_json(r));
  const Json art = artifact("montecarlo", c, hashes, archive);
  std::filesystem::create_directories(c.out_dir);
  const std::filesystem::path dir(c.out_dir);
  write_file((dir / "table1.csv").string(), table.str());
  write_file((dir / "montecarlo.json").string(), art.dump(2) + "\n");
  if (!cli.output.empty()) write_file(cli.output, art.dump(2) + "\n");
  std::cout << (cli.json ? art.dump(2) + "\n" : montecarlo_table(results));
  return ok;
}

int cmd_examples(Cli& cli, CLI::App* sub)
{
  std::vector<std::pair<std::string, std::string>> hashes;
  const RunConfig c = effective(cli, sub, hashes);
  Json all = Json::array();
  std::string text;
  for (int which : {1, 2}) {
    PanelData pd;
    pd.records = example_records(which);
    std::ostringstream csv;
    write_panel_csv(csv, pd);
    const LoadedPanel L = assemble(pd);
    const StackedDesign d = stack_design(L.panel, lim(L.panel));
    const Cor2Result c2 = check_cor2(d);
    const Cor3Result c3 = check_cor3(d);
    text += "example " + std::to_string(which) + ": rank[J,G,D] = " + std::to_string(c2.rank.rank) +
            ", rank[WJ,WG] = " + std::to_string(c3.rank.rank) + " (" + to_string(c3.verdict) + ")\n" + csv.str();
    all.push_back({{"example", which}, {"csv", csv.str()}, {"rank_JGD", c2.rank.rank}, {"rank_WJWG", c3.rank.rank}});
    if (c.out_dir != ".") {
      std::filesystem::create_directories(c.out_dir);
      write_file((std::filesystem::path(c.out_dir) / ("example" + std::to_string(which) + ".csv")).string(), csv.str());
    }
  }
  emit(cli, artifact("examples", c, hashes, all), text);
  return ok;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Panel peer effects: identification checks, profiled NLS, Monte Carlo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  Cli cli;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", cli.config_path, "JSON config; explicit flags override it");
    s->add_option("--output", cli.output, "also write the JSON artifact to this file");
    s->add_flag("--json", cli.json, "print the JSON artifact instead of the table");
    cli.option(s, "--seed", &RunConfig::seed, "random seed (default: PEERPANEL_SEED, else 1)");
  };
  auto data = [&](CLI::App* s) {
    cli.option(s, "--panel", &RunConfig::panel, "panel CSV: individual,period,group[,outcome]");
    cli.option(s, "--edges", &RunConfig::edges, "edge list CSV period,i,j,weight (overrides --network)");
    cli.option(s, "--network", &RunConfig::network, "lim|liom|pliom|social")
        ->check(CLI::IsMember({"lim", "liom", "pliom", "social", "soc"}));
    cli.option(s, "--fe", &RunConfig::fe, "group|group-period|period|none (repeatable)");
    cli.option(s, "--links", &RunConfig::links_per_person, "links per person for the social network");
    cli.flag(s, "--lenient", &RunConfig::lenient, "carry unknown CSV columns instead of rejecting them");
    cli.option(s, "--covariates", &RunConfig::covariates, "covariate columns")->delimiter(',');
    s->add_option("--min-value", cli.min_value, "keep records with col >= value (col=value, repeatable)");
    RunConfig& f = cli.flags;
    CLI::Option* mo = s->add_option("--min-obs", f.filters.min_obs, "keep individuals with at least this many records");
    CLI::Option* mg = s->add_option("--min-group-size", f.filters.min_group_size, "keep group-periods with at least this many members");
    cli.overrides.push_back([&cli, mo, mg](RunConfig& c) {
      if (mo->count()) c.filters.min_obs = cli.flags.filters.min_obs;
      if (mg->count()) c.filters.min_group_size = cli.flags.filters.min_group_size;
    });
  };
  auto design = [&](CLI::App* s) {
    cli.option(s, "--N", &RunConfig::N, "individuals (must be 5 M)");
    cli.option(s, "--M", &RunConfig::M, "groups");
    cli.option(s, "--T", &RunConfig::T, "periods");
    cli.option(s, "--p", &RunConfig::p, "per-period mobility probability");
    cli.option(s, "--rho-true", &RunConfig::rho_true, "true peer effect");
    cli.option(s, "--psi-true", &RunConfig::psi_true, "true endogenous effect");
    cli.option(s, "--eps-variance", &RunConfig::eps_variance, "error variance");
    cli.flag(s, "--correlated-effects", &RunConfig::correlated_effects, "group effects equal to group means of alpha");
    cli.option(s, "--network", &RunConfig::network, "lim|liom|pliom|social")
        ->check(CLI::IsMember({"lim", "liom", "pliom", "social", "soc"}));
    cli.option(s, "--links", &RunConfig::links_per_person, "links per person for the social network");
    cli.option(s, "--out-dir", &RunConfig::out_dir, "output directory");
  };
  auto search = [&](CLI::App* s) {
    cli.option(s, "--rho-lo", &RunConfig::rho_lo, "lower end of the rho search interval");
    cli.option(s, "--rho-hi", &RunConfig::rho_hi, "upper end of the rho search interval");
    cli.option(s, "--grid-points", &RunConfig::grid_points, "profile grid size");
    cli.option(s, "--refine-tol", &RunConfig::refine_tol, "golden-section tolerance on rho");
  };

  CLI::App* sim = app.add_subcommand("simulate", "write a simulated panel, edge list and truth file");
  common(sim);
  design(sim);
  sim->add_option("--replication", cli.replication, "replication index");

  CLI::App* idf = app.add_subcommand("identify", "run the identification checks");
  common(idf);
  data(idf);
  idf->add_option("--example", cli.flags.example, "built-in fixture 1 or 2")->check(CLI::IsMember({1, 2}));
  {
    CLI::Option* ex = idf->get_option("--example");
    cli.overrides.push_back([&cli, ex](RunConfig& c) {
      if (ex->count()) c.example = cli.flags.example;
    });
  }
  idf->add_option("--mu-alpha", cli.mu_alpha, "comma-separated mean of alpha, one entry per individual");
  cli.option(idf, "--rho", &RunConfig::rho, "peer effect at which a witness is built");
  cli.flag(idf, "--endogenous", &RunConfig::endogenous, "also run the endogenous-effects checks");
  idf->add_option("--psi-plus-rho", cli.psi_plus_rho, "value of psi + rho, when known");
  idf->add_option("--groups", cli.groups, "restrict the per-group endogenous checks to these group labels")
      ->delimiter(',');

  CLI::App* est = app.add_subcommand("estimate", "profiled NLS estimate of rho with bootstrap SE");
  common(est);
  data(est);
  search(est);
  cli.flag(est, "--force", &RunConfig::force, "fit even when the rank condition fails");
  cli.flag(est, "--peer-covariates", &RunConfig::peer_covariates, "add peer averages of the covariates");
  cli.option(est, "--bootstrap", &RunConfig::bootstrap, "wild bootstrap replicates (0 = none)");
  cli.option(est, "--cluster", &RunConfig::cluster, "observation|individual")
      ->check(CLI::IsMember({"observation", "individual"}));

  CLI::App* mc = app.add_subcommand("montecarlo", "Monte Carlo experiment; writes table1.csv and montecarlo.json");
  common(mc);
  design(mc);
  search(mc);
  cli.option(mc, "--scale", &RunConfig::scale, "desk|full|custom")->check(CLI::IsMember({"desk", "full", "custom"}));
  cli.option(mc, "--replications", &RunConfig::replications, "replications (custom scale)");
  cli.flag(mc, "--grid", &RunConfig::grid, "run all networks x periods x mobility x correlated-effects cells");

  CLI::App* exs = app.add_subcommand("examples", "print the built-in two-person fixtures");
  common(exs);
  cli.option(exs, "--out-dir", &RunConfig::out_dir, "also write example1.csv and example2.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cli, sim);
    if (idf->parsed()) return cmd_identify(cli, idf);
    if (est->parsed()) return cmd_estimate(cli, est);
    if (mc->parsed()) return cmd_montecarlo(cli, mc);
    if (exs->parsed()) return cmd_examples(cli, exs);
  } catch (const NotIdentifiedRefusal& e) {
    std::cerr << "error: " << e.what() << "\n";
    return not_identified;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  }
  return usage;
}
