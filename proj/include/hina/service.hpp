#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "hina/error.hpp"
#include "hina/hin.hpp"
#include "hina/ingestion.hpp"
#include "hina/mdl.hpp"
#include "hina/metrics.hpp"
#include "hina/pruning.hpp"

namespace hina {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string session = "default";
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

// JSON-over-HTTP front end for the analysis pipeline. Datasets and graphs are
// kept per session; analysis results are cached by (graph, parameters).
class Service {
 public:
  struct Options {
    std::optional<std::filesystem::path> data_dir;
    std::chrono::milliseconds time_budget{60'000};
  };

  Service() : Service(Options{}) {}
  explicit Service(Options opts) : opts_(std::move(opts)) {
    if (opts_.data_dir) load_persisted();
  }

  HttpResponse handle(const HttpRequest& req) {
    try {
      return route(req);
    } catch (const UsageError& e) {
      return error(400, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(400, "MalformedRequest", e.what());
    } catch (const Error& e) {
      if (e.code() == "Timeout") {
        auto r = error(503, e.code(), e.what());
        r.headers["Retry-After"] = "60";
        return r;
      }
      return error(422, e.code(), e.what());
    } catch (const std::exception& e) {
      return error(500, "InternalError", e.what());
    }
  }

  // Routes every API path through handle(); serves `ui_dir` statically if given.
  void mount(httplib::Server& server, const std::optional<std::filesystem::path>& ui_dir = {}) {
    auto bridge = [this](const httplib::Request& in, httplib::Response& out) {
      HttpRequest req{in.method, in.path, {}, in.body, "default"};
      for (const auto& [k, v] : in.params) req.query[k] = v;
      if (in.has_header("X-Session")) req.session = in.get_header_value("X-Session");
      auto res = handle(req);
      out.status = res.status;
      for (const auto& [k, v] : res.headers) out.set_header(k, v);
      out.set_content(res.body, res.content_type);
    };
    for (const char* pattern : {"/healthz", "/datasets", R"(/hins(/.*)?)"}) {
      server.Get(pattern, bridge);
      server.Post(pattern, bridge);
    }
    if (ui_dir) server.set_mount_point("/", ui_dir->string());
  }

 private:
  struct Dataset {
    std::string text;
    Table table;
  };

  struct Session {
    std::shared_mutex mutex;
    std::map<std::string, std::shared_ptr<const Dataset>> datasets;
    std::map<std::string, std::shared_ptr<const Hin>> hins;
    std::size_t next_dataset = 1;
    std::size_t next_hin = 1;
    std::mutex cache_mutex;
    std::map<std::string, std::string> cache;
  };

  static HttpResponse json_response(const nlohmann::json& j, int status = 200) {
    return {status, j.dump(), "application/json", {}};
  }

  static HttpResponse error(int status, const std::string& code, const std::string& message) {
    return json_response({{"error", code}, {"message", message}}, status);
  }

  static std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string seg;
    while (std::getline(ss, seg, '/'))
      if (!seg.empty()) parts.push_back(seg);
    return parts;
  }

  static nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    try {
      auto j = nlohmann::json::parse(body);
      if (!j.is_object()) throw UsageError("MalformedRequest", "request body must be a JSON object");
      return j;
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("MalformedRequest", e.what());
    }
  }

  static std::string query_or(const HttpRequest& req, const std::string& key, const std::string& fallback) {
    auto it = req.query.find(key);
    return it == req.query.end() ? fallback : it->second;
  }

  static double parse_double(const std::string& s, const std::string& name) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("MalformedRequest", "query parameter '" + name + "' is not a number");
    }
  }

  static std::uint64_t parse_uint(const std::string& s, const std::string& name) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("MalformedRequest", "query parameter '" + name + "' is not a non-negative integer");
    }
  }

  Session& session(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto& slot = sessions_[id];
    if (!slot) slot = std::make_unique<Session>();
    return *slot;
  }

  std::shared_ptr<const Hin> find_hin(Session& s, const std::string& id) {
    std::shared_lock lock(s.mutex);
    auto it = s.hins.find(id);
    return it == s.hins.end() ? nullptr : it->second;
  }

  template <typename F>
  HttpResponse cached(Session& s, const std::string& key, F&& compute) {
    {
      std::lock_guard lock(s.cache_mutex);
      if (auto it = s.cache.find(key); it != s.cache.end()) return {200, it->second, "application/json", {}};
    }
    std::string body = compute().dump();
    std::lock_guard lock(s.cache_mutex);
    s.cache.emplace(key, body);
    return {200, body, "application/json", {}};
  }

  ClusterResult run_cluster(const Hin& hin, std::optional<std::uint64_t> seed, int restarts) {
    ClusterOptions opts;
    opts.seed = seed;
    opts.restarts = restarts;
    opts.deadline = std::chrono::steady_clock::now() + opts_.time_budget;
    return cluster(hin, opts);
  }

  HttpResponse route(const HttpRequest& req) {
    const auto seg = split_path(req.path);
    const bool get = req.method == "GET", post = req.method == "POST";

    if (seg.size() == 1 && seg[0] == "healthz" && get) return json_response({{"status", "ok"}});

    auto& s = session(req.session);

    if (seg.size() == 1 && seg[0] == "datasets" && post) return upload_dataset(s, req);
    if (seg.size() == 1 && seg[0] == "hins" && post) return create_hin(s, req);

    if (seg.size() >= 2 && seg[0] == "hins") {
      auto hin = find_hin(s, seg[1]);
      if (!hin) return error(404, "UnknownId", "no graph with id '" + seg[1] + "'");
      const std::string& id = seg[1];

      if (seg.size() == 2 && get) return {200, to_canonical_json(*hin), "application/json", {}};

      if (seg.size() == 3 && seg[2] == "metrics" && get) {
        std::optional<std::string> group;
        if (auto it = req.query.find("group_attr"); it != req.query.end() && !it->second.empty())
          group = it->second;
        return cached(s, id + "/metrics/" + group.value_or(""),
                      [&] { return to_json(*hin, metrics_table(*hin, group)); });
      }

      if (seg.size() == 3 && seg[2] == "prune" && post) {
        auto spec = null_model_from_json(parse_body(req.body));
        return cached(s, id + "/prune/" + to_json(spec).dump(), [&] { return to_json(prune(*hin, spec), *hin); });
      }

      if (seg.size() == 3 && seg[2] == "cluster" && post) {
        auto body = parse_body(req.body);
        auto [seed, restarts] = cluster_params(body);
        return cached(s, id + "/cluster/" + cluster_key(seed, restarts),
                      [&] { return to_json(run_cluster(*hin, seed, restarts)); });
      }

      if (seg.size() == 5 && seg[2] == "clusters" && seg[4] == "projection" && get) {
        const auto r = parse_uint(seg[3], "cluster");
        NullModelSpec spec;
        spec.alpha = parse_double(query_or(req, "alpha", "0.05"), "alpha");
        spec.fix_deg = fix_deg_from_string(query_or(req, "fix_deg", "none"));
        spec.validate();
        nlohmann::json params = nlohmann::json::object();
        if (req.query.count("seed")) params["seed"] = parse_uint(req.query.at("seed"), "seed");
        if (req.query.count("restarts")) params["restarts"] = parse_uint(req.query.at("restarts"), "restarts");
        auto [seed, restarts] = cluster_params(params);
        const std::string key =
            id + "/projection/" + std::to_string(r) + "/" + cluster_key(seed, restarts) + "/" + to_json(spec).dump();
        return cached(s, key, [&] {
          auto clustering = run_cluster(*hin, seed, restarts);
          auto proj = project_cluster(*hin, clustering.best_partition, static_cast<std::size_t>(r));
          nlohmann::json out{{"projection", to_json(proj, *hin)}, {"prune", nullptr}};
          if (proj.split_by_parts && proj.graph.total_weight() > 0)
            out["prune"] = to_json(prune_projection(proj, spec), proj.graph);
          return out;
        });
      }
    }
    return error(404, "NotFound", req.method + " " + req.path + " is not an endpoint");
  }

  static std::pair<std::optional<std::uint64_t>, int> cluster_params(const nlohmann::json& body) {
    std::optional<std::uint64_t> seed;
    if (body.contains("seed") && !body["seed"].is_null()) seed = body["seed"].get<std::uint64_t>();
    const int restarts = body.value("restarts", 1);
    if (restarts < 1) throw UsageError("InvalidRestarts", "restarts must be at least 1");
    return {seed, restarts};
  }

  static std::string cluster_key(std::optional<std::uint64_t> seed, int restarts) {
    return (seed ? std::to_string(*seed) : std::string("-")) + ":" + std::to_string(restarts);
  }

  HttpResponse upload_dataset(Session& s, const HttpRequest& req) {
    std::optional<char> delim;
    if (auto it = req.query.find("delimiter"); it != req.query.end()) {
      if (it->second == "tab" || it->second == "\t")
        delim = '\t';
      else if (it->second.size() == 1)
        delim = it->second[0];
      else
        throw UsageError("MalformedRequest", "delimiter must be a single character or 'tab'");
    }
    auto ds = std::make_shared<Dataset>(Dataset{req.body, parse_delimited(req.body, delim)});
    std::string id;
    {
      std::unique_lock lock(s.mutex);
      id = "d" + std::to_string(s.next_dataset++);
      s.datasets.emplace(id, ds);
    }
    persist(req.session, "datasets", id + ".csv", req.body);
    return json_response({{"dataset_id", id}, {"rows", ds->table.rows.size()}, {"columns", ds->table.columns}});
  }

  HttpResponse create_hin(Session& s, const HttpRequest& req) {
    auto body = parse_body(req.body);
    if (!body.contains("dataset_id") || !body["dataset_id"].is_string())
      throw UsageError("MalformedRequest", "dataset_id is required");
    if (!body.contains("spec")) throw UsageError("MalformedRequest", "spec is required");
    const auto dataset_id = body["dataset_id"].get<std::string>();
    auto spec = hin_spec_from_json(body["spec"]);

    std::shared_ptr<const Dataset> ds;
    {
      std::shared_lock lock(s.mutex);
      if (auto it = s.datasets.find(dataset_id); it != s.datasets.end()) ds = it->second;
    }
    if (!ds) return error(404, "UnknownId", "no dataset with id '" + dataset_id + "'");

    auto result = ingest_with_report(ds->table, spec, HinMeta{body.value("name", std::string()), dataset_id});
    auto hin = std::make_shared<const Hin>(std::move(result.hin));
    std::string id;
    {
      std::unique_lock lock(s.mutex);
      id = "h" + std::to_string(s.next_hin++);
      s.hins.emplace(id, hin);
    }
    persist(req.session, "hins", id + ".json", to_canonical_json(*hin));
    return json_response({{"hin_id", id}, {"ingest_report", to_json(result.report)}});
  }

  void persist(const std::string& session_id, const std::string& kind, const std::string& file,
               const std::string& content) {
    if (!opts_.data_dir) return;
    auto dir = *opts_.data_dir / session_id / kind;
    std::filesystem::create_directories(dir);
    auto tmp = dir / (file + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
    }
    std::filesystem::rename(tmp, dir / file);
  }

  static std::size_t id_number(const std::string& stem) {
    try {
      return std::stoul(stem.substr(1));
    } catch (const std::exception&) {
      return 0;
    }
  }

  void load_persisted() {
    namespace fs = std::filesystem;
    if (!fs::exists(*opts_.data_dir)) return;
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    for (const auto& sdir : fs::directory_iterator(*opts_.data_dir)) {
      if (!sdir.is_directory()) continue;
      auto& s = session(sdir.path().filename().string());
      if (fs::exists(sdir.path() / "datasets"))
        for (const auto& f : fs::directory_iterator(sdir.path() / "datasets")) {
          if (f.path().extension() != ".csv") continue;
          auto text = slurp(f.path());
          auto id = f.path().stem().string();
          s.datasets.emplace(id, std::make_shared<Dataset>(Dataset{text, parse_delimited(text)}));
          s.next_dataset = std::max(s.next_dataset, id_number(id) + 1);
        }
      if (fs::exists(sdir.path() / "hins"))
        for (const auto& f : fs::directory_iterator(sdir.path() / "hins")) {
          if (f.path().extension() != ".json") continue;
          auto id = f.path().stem().string();
          s.hins.emplace(id, std::make_shared<const Hin>(hin_from_json_text(slurp(f.path()))));
          s.next_hin = std::max(s.next_hin, id_number(id) + 1);
        }
    }
  }

  Options opts_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
};

}  // namespace hina
