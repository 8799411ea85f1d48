#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "hina/error.hpp"
#include "hina/hin.hpp"
#include "hina/ingestion.hpp"
#include "hina/mdl.hpp"
#include "hina/metrics.hpp"
#include "hina/pruning.hpp"
#include "hina/service.hpp"

namespace hina::cli {

// Everything a pipeline invocation can be configured with. Flags override
// values loaded through --config.
struct PipelineConfig {
  std::string input;
  std::optional<char> delimiter;
  std::optional<HinSpec> hin_spec;
  std::string name;
  NullModelSpec null_model;
  std::optional<std::uint64_t> seed;
  int restarts = 1;
  std::int64_t draws = 10'000;
  std::optional<std::string> group_attribute;
  std::optional<std::size_t> cluster;
  std::string output_dir;
  std::string format;  // "json", "csv", or empty to infer from the output path
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
  std::string persist_dir;
  int time_budget_seconds = 60;

  bool operator==(const PipelineConfig&) const = default;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  return {{"input", c.input},
          {"delimiter", c.delimiter ? json(std::string(1, *c.delimiter)) : json()},
          {"hin_spec", c.hin_spec ? hina::to_json(*c.hin_spec) : json()},
          {"name", c.name},
          {"null_model", hina::to_json(c.null_model)},
          {"seed", c.seed ? json(*c.seed) : json()},
          {"restarts", c.restarts},
          {"draws", c.draws},
          {"group_attribute", c.group_attribute ? json(*c.group_attribute) : json()},
          {"cluster", c.cluster ? json(*c.cluster) : json()},
          {"output_dir", c.output_dir},
          {"format", c.format},
          {"host", c.host},
          {"port", c.port},
          {"ui_dir", c.ui_dir},
          {"persist_dir", c.persist_dir},
          {"time_budget_seconds", c.time_budget_seconds}};
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  try {
    PipelineConfig c;
    auto present = [&](const char* key) { return j.contains(key) && !j[key].is_null(); };
    c.input = j.value("input", c.input);
    if (present("delimiter")) {
      auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1) throw UsageError("InvalidConfig", "delimiter must be one character");
      c.delimiter = d[0];
    }
    if (present("hin_spec")) c.hin_spec = hin_spec_from_json(j["hin_spec"]);
    c.name = j.value("name", c.name);
    if (present("null_model")) c.null_model = null_model_from_json(j["null_model"]);
    if (present("seed")) c.seed = j["seed"].get<std::uint64_t>();
    c.restarts = j.value("restarts", c.restarts);
    c.draws = j.value("draws", c.draws);
    if (present("group_attribute")) c.group_attribute = j["group_attribute"].get<std::string>();
    if (present("cluster")) c.cluster = j["cluster"].get<std::size_t>();
    c.output_dir = j.value("output_dir", c.output_dir);
    c.format = j.value("format", c.format);
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.ui_dir = j.value("ui_dir", c.ui_dir);
    c.persist_dir = j.value("persist_dir", c.persist_dir);
    c.time_budget_seconds = j.value("time_budget_seconds", c.time_budget_seconds);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("InvalidConfig", e.what());
  }
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("FileNotFound", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a sibling temp file and renames it into place, so a failed
// run never leaves a truncated artifact behind.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("WriteFailed", "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) fail("WriteFailed", "cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline Hin load_hin(const std::string& path) { return hin_from_json_text(read_file(path)); }

inline std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
  }
  return std::nullopt;
}

struct Output {
  std::string out;
  std::string format;

  bool csv() const { return format == "csv"; }
};

class Runner {
 public:
  Runner(PipelineConfig cfg, std::ostream& out, std::ostream& err) : cfg_(std::move(cfg)), out_(out), err_(err) {}

  PipelineConfig& config() { return cfg_; }

  std::string resolve_format(const Output& o) const {
    if (!o.format.empty()) return o.format;
    if (!cfg_.format.empty()) return cfg_.format;
    return std::filesystem::path(o.out).extension() == ".csv" ? "csv" : "json";
  }

  void emit(const Output& o, const std::string& default_name, const std::string& content) {
    if (!o.out.empty()) {
      write_atomic(o.out, content);
    } else if (!cfg_.output_dir.empty()) {
      write_atomic(std::filesystem::path(cfg_.output_dir) / default_name, content);
    } else {
      out_ << content;
    }
  }

  void build(const Output& o, const std::vector<std::string>& set1, const std::vector<std::string>& set2,
             const std::string& weight_column, const std::vector<std::string>& attrs,
             const std::vector<std::string>& filters, bool allow_self, const std::string& report_path) {
    HinSpec spec = cfg_.hin_spec.value_or(HinSpec{});
    if (!set1.empty()) spec.set1_columns = set1;
    if (!set2.empty()) spec.set2_columns = set2;
    if (!weight_column.empty()) spec.weight_mode = SumColumn{weight_column};
    for (const auto& a : attrs) {
      auto colon = a.rfind(':');
      if (colon == std::string::npos)
        spec.attribute_columns.push_back({a, NodeSet::Set1});
      else
        spec.attribute_columns.push_back({a.substr(0, colon), node_set_from_string(a.substr(colon + 1))});
    }
    for (const auto& f : filters) {
      auto eq = f.find('=');
      if (eq == std::string::npos) throw UsageError("InvalidSpec", "--filter expects COLUMN=VALUE, got '" + f + "'");
      spec.row_filter.push_back({f.substr(0, eq), f.substr(eq + 1)});
    }
    spec.allow_self_pairs = spec.allow_self_pairs || allow_self;
    spec.validate();
    cfg_.hin_spec = spec;
    if (cfg_.input.empty()) throw UsageError("MissingInput", "--input is required");

    auto table = parse_delimited(read_file(cfg_.input), cfg_.delimiter);
    auto name = cfg_.name.empty() ? std::filesystem::path(cfg_.input).stem().string() : cfg_.name;
    auto result = ingest_with_report(table, spec, HinMeta{name, std::filesystem::path(cfg_.input).filename().string()});
    if (!report_path.empty()) write_atomic(report_path, to_json(result.report).dump(2) + "\n");
    for (const auto& d : result.report.diagnostics) err_ << "row " << d.row << ": " << d.message << "\n";
    emit(o, "hin.json", to_canonical_json(result.hin));
  }

  void metrics(const Output& o) {
    auto hin = load_hin(cfg_.input);
    auto rows = metrics_table(hin, cfg_.group_attribute);
    if (resolve_format(o) == "csv")
      emit(o, "metrics.csv", metrics_csv(hin, rows));
    else
      emit(o, "metrics.json", to_json(hin, rows).dump(2) + "\n");
  }

  void prune(const Output& o) {
    auto hin = load_hin(cfg_.input);
    auto result = hina::prune(hin, cfg_.null_model);
    if (resolve_format(o) == "csv") {
      std::string csv = "set1,set2,w,kept,threshold,n,rho\n";
      for (const auto& t : result.edges) {
        csv += csv_escape(hin.label1(t.edge.i).display()) + ',' + csv_escape(hin.label2(t.edge.j).display()) + ',' +
               std::to_string(t.edge.w) + (t.kept ? ",true," : ",false,") + std::to_string(t.threshold) + ',' +
               std::to_string(t.trials) + ',' + format_double(t.rho) + '\n';
      }
      emit(o, "prune.csv", csv);
    } else {
      emit(o, "prune.json", to_json(result, hin).dump(2) + "\n");
    }
  }

  ClusterResult run_cluster(const Hin& hin, bool exhaustive) {
    if (exhaustive) return exhaustive_cluster(hin);
    return cluster(hin, ClusterOptions{cfg_.seed, cfg_.restarts, std::nullopt});
  }

  void cluster_cmd(const Output& o, bool exhaustive) {
    auto hin = load_hin(cfg_.input);
    auto result = run_cluster(hin, exhaustive);
    if (resolve_format(o) == "csv") {
      std::string csv = "label,cluster\n";
      for (std::size_t i = 0; i < hin.n1(); ++i)
        csv += csv_escape(hin.label1(i).display()) + ',' + std::to_string(result.best_partition.label(i)) + '\n';
      emit(o, "clusters.csv", csv);
    } else {
      emit(o, "clusters.json", to_json(result).dump(2) + "\n");
    }
  }

  void project(const Output& o, const std::string& clusters_path) {
    auto hin = load_hin(cfg_.input);
    if (!cfg_.cluster) throw UsageError("MissingCluster", "--cluster is required");
    Partition partition;
    if (!clusters_path.empty()) {
      auto j = nlohmann::json::parse(read_file(clusters_path), nullptr, false);
      if (j.is_discarded() || !j.contains("labels")) fail("InvalidClusters", "'" + clusters_path + "' has no labels");
      partition = Partition::canonical(j["labels"].get<std::vector<std::size_t>>());
    } else {
      partition = run_cluster(hin, false).best_partition;
    }
    auto projection = project_cluster(hin, partition, *cfg_.cluster);
    emit(o, "projection.json", to_canonical_json(projection.graph));
  }

  void simulate(const Output& o) {
    auto hin = load_hin(cfg_.input);
    auto report = null_simulation(hin, cfg_.null_model, cfg_.draws, cfg_.seed.value_or(0));
    emit(o, "calibration.json", to_json(report).dump(2) + "\n");
  }

  int serve() {
    Service::Options opts;
    if (!cfg_.persist_dir.empty()) opts.data_dir = cfg_.persist_dir;
    if (cfg_.time_budget_seconds < 1) throw UsageError("InvalidTimeBudget", "--time-budget must be positive");
    opts.time_budget = std::chrono::seconds(cfg_.time_budget_seconds);
    Service service(opts);
    httplib::Server server;
    std::optional<std::filesystem::path> ui;
    if (!cfg_.ui_dir.empty()) ui = cfg_.ui_dir;
    service.mount(server, ui);
    err_ << "listening on " << cfg_.host << ":" << cfg_.port << std::endl;
    if (!server.listen(cfg_.host, cfg_.port)) fail("ListenFailed", "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    return 0;
  }

 private:
  PipelineConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
};

inline std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace detail

// Runs one invocation. Returns 0 on success, 1 on data errors, 2 on usage
// errors. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  PipelineConfig cfg;
  try {
    if (auto path = detail::config_path(args))
      cfg = config_from_json(nlohmann::json::parse(detail::read_file(*path)));
  } catch (const nlohmann::json::exception& e) {
    err << "error: InvalidConfig: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (cfg.output_dir.empty()) cfg.output_dir = detail::env_or("HINA_OUT_DIR", "");
  if (cfg.persist_dir.empty()) cfg.persist_dir = detail::env_or("HINA_PERSIST_DIR", "");
  if (auto port = detail::env_or("HINA_PORT", ""); !port.empty()) {
    try {
      cfg.port = std::stoi(port);
    } catch (const std::exception&) {
      err << "error: InvalidPort: HINA_PORT is not a number\n";
      return 2;
    }
  }

  detail::Runner runner(std::move(cfg), out, err);
  auto& c = runner.config();

  CLI::App app{"Heterogeneous interaction network analysis", "hina"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_file, save_config;
  detail::Output o;
  std::string fix_deg = to_string(c.null_model.fix_deg);
  std::uint64_t seed = c.seed.value_or(0);
  std::size_t cluster_id = c.cluster.value_or(0);
  std::string group_attr = c.group_attribute.value_or("");
  std::string delimiter = c.delimiter ? std::string(1, *c.delimiter) : "";

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON pipeline config supplying defaults");
    sub->add_option("--save-config", save_config, "Write the effective config as JSON");
    sub->add_option("--out-dir", c.output_dir, "Directory for artifacts when --out is omitted (env HINA_OUT_DIR)");
  };
  auto output = [&](CLI::App* sub, bool tabular) {
    sub->add_option("-o,--out", o.out, "Output path (stdout when omitted)");
    if (tabular)
      sub->add_option("--format", o.format, "Output format, inferred from --out when omitted")
          ->check(CLI::IsMember({"json", "csv"}));
  };
  auto hin_input = [&](CLI::App* sub) { sub->add_option("--hin", c.input, "Graph JSON produced by build"); };
  auto null_model = [&](CLI::App* sub) {
    sub->add_option("--alpha", c.null_model.alpha, "Significance level in (0, 1)");
    sub->add_option("--fix-deg", fix_deg, "Null model: none, set1 or set2")
        ->check(CLI::IsMember({"none", "set1", "set2"}));
    sub->add_flag("--bonferroni", c.null_model.bonferroni, "Divide alpha by the number of edges");
  };
  auto seeded = [&](CLI::App* sub) { return sub->add_option("--seed", seed, "Seed for randomized steps"); };

  std::vector<std::string> set1, set2, attrs, filters;
  std::string weight_column, report_path;
  bool allow_self = false;
  auto* build = app.add_subcommand("build", "Build a graph from a delimited interaction log");
  common(build);
  output(build, false);
  build->add_option("-i,--input", c.input, "Interaction log (CSV or TSV)");
  build->add_option("--set1", set1, "Columns forming Set1 labels")->delimiter(',');
  build->add_option("--set2", set2, "Columns forming Set2 labels")->delimiter(',');
  build->add_option("--delimiter", delimiter, "Field delimiter, 'tab' for tabs (auto-detected when omitted)");
  build->add_option("--weight-column", weight_column, "Sum this integer column instead of counting rows");
  build->add_option("--attr", attrs, "Attribute column, optionally COLUMN:set1 or COLUMN:set2");
  build->add_option("--filter", filters, "Keep only rows with COLUMN=VALUE");
  build->add_flag("--allow-self-pairs", allow_self, "Keep rows whose Set1 label reappears in Set2");
  build->add_option("--name", c.name, "Graph name stored in the metadata");
  build->add_option("--report", report_path, "Write the ingestion report JSON here");

  auto* metrics = app.add_subcommand("metrics", "Per-node quantity and diversity");
  common(metrics);
  output(metrics, true);
  hin_input(metrics);
  metrics->add_option("--group-attr", group_attr, "Set1 attribute defining subgroups");

  auto* prune = app.add_subcommand("prune", "Annotate edges against a binomial null model");
  common(prune);
  output(prune, true);
  hin_input(prune);
  null_model(prune);

  bool exhaustive = false;
  auto* cluster = app.add_subcommand("cluster", "Minimum description length clustering of Set1");
  common(cluster);
  output(cluster, true);
  hin_input(cluster);
  auto* cluster_seed = seeded(cluster);
  cluster->add_option("--restarts", c.restarts, "Greedy passes; extra passes shuffle tie order by seed");
  cluster->add_flag("--exhaustive", exhaustive, "Enumerate every partition (small graphs only)");

  std::string clusters_path;
  auto* project = app.add_subcommand("project", "Project one cluster onto its Set2 neighborhood");
  common(project);
  output(project, false);
  hin_input(project);
  auto* project_cluster_opt = project->add_option("--cluster", cluster_id, "Cluster id");
  project->add_option("--clusters", clusters_path, "Cluster JSON to take labels from instead of reclustering");
  auto* project_seed = seeded(project);
  project->add_option("--restarts", c.restarts, "Greedy passes when reclustering");

  auto* simulate = app.add_subcommand("simulate-null", "Monte Carlo calibration of pruning thresholds");
  common(simulate);
  output(simulate, false);
  hin_input(simulate);
  null_model(simulate);
  auto* simulate_seed = seeded(simulate);
  simulate->add_option("--draws", c.draws, "Number of simulated weight configurations");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  common(serve);
  serve->add_option("--host", c.host, "Bind address");
  serve->add_option("--port", c.port, "Port (env HINA_PORT)");
  serve->add_option("--ui-dir", c.ui_dir, "Static UI bundle served under /");
  serve->add_option("--persist-dir", c.persist_dir, "Persist sessions here (env HINA_PERSIST_DIR)");
  serve->add_option("--time-budget", c.time_budget_seconds, "Clustering time budget in seconds");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    c.null_model.fix_deg = fix_deg_from_string(fix_deg);
    for (auto* opt : {cluster_seed, project_seed, simulate_seed})
      if (opt->count() > 0) c.seed = seed;
    if (project_cluster_opt->count() > 0) c.cluster = cluster_id;
    if (!group_attr.empty()) c.group_attribute = group_attr;
    if (delimiter == "tab" || delimiter == "\\t")
      c.delimiter = '\t';
    else if (delimiter.size() == 1)
      c.delimiter = delimiter[0];
    else if (!delimiter.empty())
      throw UsageError("InvalidDelimiter", "--delimiter must be one character or 'tab'");
    if (c.restarts < 1) throw UsageError("InvalidRestarts", "--restarts must be at least 1");
    if (c.draws < 1) throw UsageError("InvalidDraws", "--draws must be at least 1");
    c.null_model.validate();
    if (!o.format.empty()) c.format = o.format;

    auto* sub = app.get_subcommands().front();
    if (sub != build && sub != serve && c.input.empty()) throw UsageError("MissingInput", "--hin is required");

    if (sub == build) runner.build(o, set1, set2, weight_column, attrs, filters, allow_self, report_path);
    if (sub == metrics) runner.metrics(o);
    if (sub == prune) runner.prune(o);
    if (sub == cluster) runner.cluster_cmd(o, exhaustive);
    if (sub == project) runner.project(o, clusters_path);
    if (sub == simulate) runner.simulate(o);
    if (!save_config.empty()) detail::write_atomic(save_config, to_json(c).dump(2) + "\n");
    if (sub == serve) return runner.serve();
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace hina::cli
