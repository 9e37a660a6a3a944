#pragma once

// HTTP task service for human judges:
//   GET  /api/task?kind=imposter_host|relatedness   next unserved task, truth withheld (204 when none left)
//   POST /api/judgment                              append a JudgmentRecord to the log
//   GET  /api/progress                              counts per task kind
//   GET  /images/{id}                               image bytes

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

// Eigen ahead of httplib: <resolv.h> defines _res, an Eigen parameter name.
#include <Eigen/Core>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/eval/tasks.hpp"

namespace memeclust::pipeline {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class TaskService {
 public:
  TaskService(std::vector<eval::TaskDefinition> tasks, CorpusManifest manifest, std::filesystem::path manifest_path,
              std::filesystem::path judgment_log)
      : tasks_(std::move(tasks)),
        manifest_(std::move(manifest)),
        manifest_path_(std::move(manifest_path)),
        log_path_(std::move(judgment_log)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (!by_id_.emplace(tasks_[i].task_id, i).second)
        throw InvariantError("duplicate task id '" + tasks_[i].task_id + "'");
    }
    // Resume: tasks already judged in an existing log are not served again.
    if (std::filesystem::exists(log_path_))
      for (const auto& j : eval::read_judgments(log_path_))
        if (by_id_.count(j.task_id)) {
          judged_.insert(j.task_id);
          served_.insert(j.task_id);
        }
    if (!log_path_.parent_path().empty()) std::filesystem::create_directories(log_path_.parent_path());
  }

  /// Public JSON for the next unserved task of `kind` (any kind when empty), or null.
  nlohmann::ordered_json next_task(const std::string& kind) {
    std::lock_guard lock(mu_);
    for (const auto& t : tasks_) {
      if (served_.count(t.task_id)) continue;
      if (!kind.empty() && eval::to_string(t.kind) != kind) continue;
      served_.insert(t.task_id);
      auto j = eval::to_json(t, false);
      auto images = nlohmann::ordered_json::array();
      for (const auto& id : t.presented) images.push_back({{"id", id}, {"url", "/images/" + id}});
      j["images"] = images;
      return j;
    }
    return nullptr;
  }

  /// Validates and appends. Returns an HTTP status and a reason.
  std::pair<int, std::string> submit(const std::string& body) {
    eval::JudgmentRecord r;
    try {
      r = eval::judgment_from_json(nlohmann::json::parse(body));
    } catch (const nlohmann::json::exception& e) {
      return {400, std::string("malformed judgment: ") + e.what()};
    } catch (const Error& e) {
      return {400, std::string("malformed judgment: ") + e.what()};
    }
    std::lock_guard lock(mu_);
    auto it = by_id_.find(r.task_id);
    if (it == by_id_.end()) return {404, "unknown task '" + r.task_id + "'"};
    const auto& task = tasks_[it->second];
    if (r.presented.empty()) r.presented = task.presented;
    if (auto problem = eval::judgment_problem(task, r)) return {422, *problem};
    r.cluster_id = task.cluster_id;
    if (r.timestamp.empty()) r.timestamp = utc_timestamp();
    std::ofstream out(log_path_, std::ios::app);
    if (!out) return {500, "cannot append to the judgment log"};
    out << eval::to_json(r).dump() << '\n';
    out.flush();
    judged_.insert(r.task_id);
    ++appended_;
    return {201, "recorded"};
  }

  nlohmann::ordered_json progress() const {
    std::lock_guard lock(mu_);
    nlohmann::ordered_json j;
    for (auto kind : {eval::TaskKind::imposter_host, eval::TaskKind::relatedness}) {
      std::size_t total = 0, served = 0, judged = 0;
      for (const auto& t : tasks_) {
        if (t.kind != kind) continue;
        ++total;
        served += served_.count(t.task_id);
        judged += judged_.count(t.task_id);
      }
      j[std::string(eval::to_string(kind))] = {{"total", total}, {"served", served}, {"judged", judged}};
    }
    j["judgments_appended"] = appended_;
    return j;
  }

  std::optional<std::filesystem::path> image_file(const std::string& id) const {
    auto idx = manifest_.find(id);
    if (!idx) return std::nullopt;
    return io::resolve_image_path(manifest_path_, manifest_[*idx]);
  }

  /// Registers the four endpoints.
  void bind(httplib::Server& server) {
    server.Get("/api/task", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "";
      if (!kind.empty() && kind != "imposter_host" && kind != "relatedness") {
        reply(res, 400, "unknown task kind '" + kind + "'");
        return;
      }
      auto j = next_task(kind);
      if (j.is_null()) {
        res.status = 204;
        return;
      }
      res.set_content(j.dump(), "application/json");
    });
    server.Post("/api/judgment", [this](const httplib::Request& req, httplib::Response& res) {
      auto [status, reason] = submit(req.body);
      reply(res, status, reason);
    });
    server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(progress().dump(), "application/json");
    });
    server.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto path = image_file(req.matches[1]);
      std::ifstream in;
      if (path) in.open(*path, std::ios::binary);
      if (!path || !in) {
        reply(res, 404, "no image '" + std::string(req.matches[1]) + "'");
        return;
      }
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      const auto ext = path->extension().string();
      const char* type = ext == ".png"                    ? "image/png"
                         : (ext == ".jpg" || ext == ".jpeg") ? "image/jpeg"
                         : ext == ".gif"                  ? "image/gif"
                                                          : "application/octet-stream";
      res.set_content(std::move(bytes), type);
    });
  }

 private:
  static void reply(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    nlohmann::ordered_json j;
    j[status < 400 ? "status" : "error"] = message;
    res.set_content(j.dump(), "application/json");
  }

  std::vector<eval::TaskDefinition> tasks_;
  std::map<std::string, std::size_t> by_id_;
  CorpusManifest manifest_;
  std::filesystem::path manifest_path_, log_path_;
  mutable std::mutex mu_;
  std::set<std::string> served_, judged_;
  std::size_t appended_ = 0;
};

}  // namespace memeclust::pipeline
