#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace rankforge {

inline constexpr int kApiVersion = 1;

struct ServiceConfig {
  std::filesystem::path data_dir = "rankforge-data";
  // Directory holding <id>.<ext> images, or a URL template containing "{id}".
  std::string image_source;
};

struct ApiResult {
  int status = 200;
  nlohmann::json body;
};

// Annotation sessions over JSON. Every call reads the persisted snapshot and
// writes it back before answering, so a restarted service picks up where the
// last one stopped.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceConfig cfg);

  ApiResult create_session(const std::string& body);
  ApiResult manifest(const std::string& session_id);
  ApiResult task(const std::string& session_id);
  ApiResult respond(const std::string& session_id, const std::string& body);
  ApiResult export_ranking(const std::string& session_id);

  // Registers every route on `server`.
  void mount(httplib::Server& server);

  const ServiceConfig& config() const { return cfg_; }
  std::filesystem::path snapshot_path(const std::string& session_id) const;
  std::filesystem::path meta_path(const std::string& session_id) const;
  std::filesystem::path export_path(const std::string& session_id) const;

 private:
  std::mutex& session_lock(const std::string& session_id);
  std::string fresh_session_id();

  ServiceConfig cfg_;
  std::mutex locks_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// Blocks serving on host:port until the server is stopped.
void serve(const ServiceConfig& cfg, const std::string& host, int port);

}  // namespace rankforge
