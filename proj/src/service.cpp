#include "rankforge/service.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "rankforge/annotation.hpp"
#include "rankforge/dataset.hpp"
#include "rankforge/numerics.hpp"

namespace rankforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ApiResult error(int status, const std::string& message) {
  return {status, {{"api_version", kApiVersion}, {"error", message}}};
}

// Ids end up in file names, so keep them to a safe alphabet.
bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void atomic_write(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::optional<json> parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

json progress_json(const AnnotationSession& s) {
  return {{"answered", s.answered()}, {"estimated_remaining", s.estimated_remaining()}};
}

json manifest_json(const AnnotationSession& s, const json& meta) {
  return {{"api_version", kApiVersion},
          {"session_id", s.id()},
          {"n_items", s.item_ids().size()},
          {"n_sub", s.n_sub()},
          {"seed", s.seed()},
          {"image_source", meta.value("image_source", std::string())},
          {"created_ms", s.created_ms()},
          {"updated_ms", s.updated_ms()},
          {"phase", to_string(s.phase())},
          {"task_token", s.state_token()},
          {"progress", progress_json(s)}};
}

}  // namespace

AnnotationService::AnnotationService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  fs::create_directories(cfg_.data_dir / "sessions");
  fs::create_directories(cfg_.data_dir / "exports");
}

fs::path AnnotationService::snapshot_path(const std::string& id) const {
  return cfg_.data_dir / "sessions" / (id + ".json");
}

fs::path AnnotationService::meta_path(const std::string& id) const {
  return cfg_.data_dir / "sessions" / (id + ".meta.json");
}

fs::path AnnotationService::export_path(const std::string& id) const {
  return cfg_.data_dir / "exports" / (id + ".jsonl");
}

std::mutex& AnnotationService::session_lock(const std::string& id) {
  std::lock_guard guard(locks_guard_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string AnnotationService::fresh_session_id() {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  for (;;) {
    const auto t = std::chrono::steady_clock::now().time_since_epoch().count();
    const std::uint64_t h = mix64(static_cast<std::uint64_t>(t) ^ (std::uint64_t{rd()} << 32) ^
                                  mix64(counter.fetch_add(1) + 0x9e37));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    if (!fs::exists(snapshot_path(buf))) return buf;
  }
}

ApiResult AnnotationService::create_session(const std::string& body) {
  const auto req = parse_body(body);
  if (!req) return error(400, "body must be a JSON object");
  if (req->contains("api_version") && req->at("api_version") != kApiVersion)
    return error(400, "unsupported api_version");

  std::vector<std::string> ids;
  std::string dataset;
  std::size_t n_sub = 6;
  std::uint64_t seed = 0;
  std::string image_source = cfg_.image_source;
  try {
    if (req->contains("item_ids")) {
      ids = req->at("item_ids").get<std::vector<std::string>>();
    } else if (req->contains("dataset")) {
      dataset = req->at("dataset").get<std::string>();
      for (const auto& it : load_dataset(dataset).items) ids.push_back(it.id);
    } else {
      return error(400, "need item_ids or dataset");
    }
    if (req->contains("n_sub")) {
      const auto v = req->at("n_sub").get<long long>();
      if (v < 2 || v > 12) return error(400, "n_sub must be in 2..12");
      n_sub = static_cast<std::size_t>(v);
    }
    seed = req->value("seed", std::uint64_t{0});
    image_source = req->value("image_source", image_source);
  } catch (const std::exception& e) {
    return error(400, e.what());
  }
  for (const auto& id : ids)
    if (!valid_id(id)) return error(400, "item id '" + id + "' has characters outside [A-Za-z0-9._-]");

  try {
    const std::string sid = fresh_session_id();
    std::lock_guard lock(session_lock(sid));
    AnnotationSession s = AnnotationSession::create(sid, std::move(ids), n_sub, seed, now_ms());
    const json meta = {{"image_source", image_source},
                       {"dataset", dataset.empty() ? json(nullptr) : json(dataset)}};
    atomic_write(meta_path(sid), meta.dump() + "\n");
    save_session(s, snapshot_path(sid));
    return {201, manifest_json(s, meta)};
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  }
}

ApiResult AnnotationService::manifest(const std::string& sid) {
  if (!valid_id(sid) || !fs::exists(snapshot_path(sid))) return error(404, "unknown session");
  std::lock_guard lock(session_lock(sid));
  return {200, manifest_json(load_session(snapshot_path(sid)), read_json(meta_path(sid)))};
}

ApiResult AnnotationService::task(const std::string& sid) {
  if (!valid_id(sid) || !fs::exists(snapshot_path(sid))) return error(404, "unknown session");
  std::lock_guard lock(session_lock(sid));
  const AnnotationSession s = load_session(snapshot_path(sid));
  if (s.phase() == Phase::done) return error(409, "session complete");
  const Task t = s.current_task();
  json j = {{"api_version", kApiVersion},
            {"session_id", sid},
            {"phase", to_string(s.phase())},
            {"task_token", s.state_token()},
            {"progress", {{"answered", t.answered}, {"estimated_remaining", t.estimated_remaining}}}};
  if (t.kind == Task::Kind::sort_sublist) {
    j["kind"] = "sort_sublist";
    j["ids"] = t.ids;
  } else {
    j["kind"] = "compare";
    j["id_a"] = t.id_a;
    j["id_b"] = t.id_b;
  }
  return {200, j};
}

ApiResult AnnotationService::respond(const std::string& sid, const std::string& body) {
  if (!valid_id(sid) || !fs::exists(snapshot_path(sid))) return error(404, "unknown session");
  const auto req = parse_body(body);
  if (!req) return error(400, "body must be a JSON object");
  if (!req->contains("task_token") || !req->at("task_token").is_string())
    return error(400, "missing task_token");

  std::lock_guard lock(session_lock(sid));
  AnnotationSession s = load_session(snapshot_path(sid));
  if (req->at("task_token").get<std::string>() != s.state_token())
    return error(409, "stale task_token");

  if (req->value("undo", false)) {
    try {
      s.undo();
    } catch (const std::logic_error& e) {
      return error(409, e.what());
    }
  } else {
    if (s.phase() == Phase::done) return error(409, "session complete");
    if (!req->contains("response") || !req->at("response").is_object())
      return error(400, "missing response object");
    const json& r = req->at("response");
    Response response;
    try {
      if (r.contains("order"))
        response = Response::sorted(r.at("order").get<std::vector<std::string>>());
      else if (r.contains("choice"))
        response = Response::chose(r.at("choice").get<std::string>());
      else
        return error(400, "response needs order or choice");
      s.submit(response, now_ms());
    } catch (const json::exception& e) {
      return error(400, e.what());
    } catch (const std::invalid_argument& e) {
      return error(400, e.what());
    }
  }
  save_session(s, snapshot_path(sid));
  return {200,
          {{"api_version", kApiVersion},
           {"session_id", sid},
           {"phase", to_string(s.phase())},
           {"task_token", s.state_token()},
           {"progress", progress_json(s)}}};
}

ApiResult AnnotationService::export_ranking(const std::string& sid) {
  if (!valid_id(sid) || !fs::exists(snapshot_path(sid))) return error(404, "unknown session");
  std::lock_guard lock(session_lock(sid));
  const AnnotationSession s = load_session(snapshot_path(sid));
  if (s.phase() != Phase::done) return error(409, "session incomplete");
  const auto ranks = s.export_ranking();
  const json meta = read_json(meta_path(sid));

  json ranking = json::array();
  for (const auto& id : s.final_order()) ranking.push_back({{"id", id}, {"rank", ranks.at(id)}});

  // Overlay in the dataset file format: the full dataset when the session
  // came from one, otherwise id/rank records under a dataset-style header.
  if (meta.contains("dataset") && meta["dataset"].is_string()) {
    const RankedDataset ds = load_dataset(meta["dataset"].get<std::string>());
    save_dataset(with_ranks(ds, ranks, Provenance::annotation_export), export_path(sid));
  } else {
    std::ostringstream out;
    out << json{{"format", "rankforge-dataset"},
                {"version", 1},
                {"overlay", true},
                {"n", ranks.size()},
                {"provenance", to_string(Provenance::annotation_export)}}
               .dump()
        << '\n';
    for (const auto& id : s.item_ids()) out << json{{"id", id}, {"rank", ranks.at(id)}}.dump() << '\n';
    atomic_write(export_path(sid), out.str());
  }
  return {200,
          {{"api_version", kApiVersion},
           {"session_id", sid},
           {"n", ranks.size()},
           {"ranking", ranking}}};
}

void AnnotationService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ApiResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto guarded = [reply](auto fn) {
    return [reply, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, fn(req));
      } catch (const std::exception& e) {
        reply(res, error(500, e.what()));
      }
    };
  };

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server.Post("/sessions",
              guarded([this](const httplib::Request& req) { return create_session(req.body); }));
  server.Get(R"(/sessions/([^/]+))",
             guarded([this](const httplib::Request& req) { return manifest(req.matches[1]); }));
  server.Get(R"(/sessions/([^/]+)/task)",
             guarded([this](const httplib::Request& req) { return task(req.matches[1]); }));
  server.Post(R"(/sessions/([^/]+)/response)", guarded([this](const httplib::Request& req) {
                return respond(req.matches[1], req.body);
              }));
  server.Get(R"(/sessions/([^/]+)/export)",
             guarded([this](const httplib::Request& req) { return export_ranking(req.matches[1]); }));

  server.Get(R"(/items/([^/]+)/image)", [this, reply](const httplib::Request& req,
                                                      httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!valid_id(id)) return reply(res, error(404, "unknown item"));
    const std::string& src = cfg_.image_source;
    if (const auto pos = src.find("{id}"); pos != std::string::npos) {
      std::string url = src;
      url.replace(pos, 4, id);
      res.set_redirect(url);
      return;
    }
    static const std::array<std::pair<const char*, const char*>, 6> kTypes{{{".png", "image/png"},
                                                                            {".jpg", "image/jpeg"},
                                                                            {".jpeg", "image/jpeg"},
                                                                            {".gif", "image/gif"},
                                                                            {".bmp", "image/bmp"},
                                                                            {".webp", "image/webp"}}};
    if (src.empty()) return reply(res, error(404, "no image_source configured"));
    for (const auto& [ext, type] : kTypes) {
      const fs::path p = fs::path(src) / (id + ext);
      if (!fs::is_regular_file(p)) continue;
      std::ifstream in(p, std::ios::binary);
      std::ostringstream data;
      data << in.rdbuf();
      res.set_content(data.str(), type);
      return;
    }
    reply(res, error(404, "no image for item " + id));
  });
}

void serve(const ServiceConfig& cfg, const std::string& host, int port) {
  httplib::Server server;
  AnnotationService service(cfg);
  service.mount(server);
  if (!server.listen(host, port))
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace rankforge
