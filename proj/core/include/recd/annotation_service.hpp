#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recd/correction.hpp"
#include "recd/microtask.hpp"

namespace recd {

/// Milliseconds since an arbitrary epoch. Injected so tests can step time.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

enum class AssignmentState { Pending, Served, Answered, Expired };
std::string_view to_string(AssignmentState state) noexcept;

class UnknownAssignment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidAnswer : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EventLogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceConfig {
  std::int64_t lease_ms = 10 * 60 * 1000;
  bool fsync = true;
};

struct SubmitResult {
  std::uint64_t sequence = 0;  // event that recorded the response
  bool duplicate = false;      // true when the same pair was already answered
};

struct Progress {
  std::size_t tasks = 0;
  std::size_t completed_tasks = 0;
  std::size_t responses = 0;
  std::size_t required_responses = 0;
  std::size_t open_leases = 0;
};

/// Crowd task queue backed by an append-only JSON-lines event log. Every
/// mutation is appended (and fsynced) before the call returns, and opening an
/// existing log replays it. A torn final line from a crash is dropped.
class AnnotationService {
 public:
  explicit AnnotationService(std::filesystem::path log_path, ServiceConfig config = {},
                             Clock clock = system_clock_ms);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Registers tasks. Ids already known are skipped; returns how many were new.
  std::size_t add_tasks(std::span<const Microtask> tasks);

  /// Highest-priority task this annotator has never been served that still
  /// has a free slot. Empty when nothing is available.
  std::optional<Microtask> next_task(const std::string& annotator_id);

  SubmitResult submit_response(const std::string& task_id, const std::string& annotator_id,
                               const Answer& answer, std::int64_t duration_ms);

  Progress progress();
  /// Responses in log order, optionally restricted to the given task ids.
  std::vector<AnnotatorResponse> export_responses(
      const std::optional<std::set<std::string>>& tasks = std::nullopt) const;

  std::optional<Microtask> task(const std::string& task_id) const;
  std::optional<AssignmentState> state(const std::string& task_id,
                                       const std::string& annotator_id) const;

  /// Blocks until every listed task has all its answers or the timeout passes.
  bool wait_for(const std::set<std::string>& task_ids, std::chrono::milliseconds timeout);

  /// Canonical dump of the full state, for replay comparisons.
  std::string snapshot() const;
  std::uint64_t last_sequence() const;
  const std::filesystem::path& log_path() const noexcept { return path_; }

 private:
  struct Assignment {
    AssignmentState state = AssignmentState::Pending;
    std::int64_t served_at = 0;
    std::int64_t answered_at = 0;
    std::uint64_t response_seq = 0;
  };
  struct TaskState {
    Microtask task;
    std::uint64_t order = 0;
    std::map<std::string, Assignment> assignments;
    int answered = 0;
    int leased = 0;
  };
  struct Event;

  void replay();
  void apply(const Event& e);
  void append(Event& e);
  void expire_leases(std::int64_t now);
  bool complete(const TaskState& t) const noexcept { return t.answered >= t.task.assignments; }

  std::filesystem::path path_;
  ServiceConfig config_;
  Clock clock_;
  int fd_ = -1;

  mutable std::mutex mu_;
  std::condition_variable answered_cv_;
  std::uint64_t seq_ = 0;
  std::map<std::string, TaskState> tasks_;
  std::vector<AnnotatorResponse> responses_;
};

/// Feeds run_correction from a live service: publishes tasks and waits for
/// answers. Tasks still short of answers at the timeout come back partial.
class ServiceResponseSource : public ResponseSource {
 public:
  ServiceResponseSource(AnnotationService& service, std::chrono::milliseconds timeout);
  std::vector<AnnotatorResponse> collect(std::span<const Microtask> tasks) override;
  bool timed_out() const noexcept { return timed_out_; }

 private:
  AnnotationService& service_;
  std::chrono::milliseconds timeout_;
  bool timed_out_ = false;
};

struct HttpConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path image_dir;
  std::filesystem::path static_dir;  // webui bundle, mounted at /
  int threads = 8;
};

/// HTTP front end of the service.
///   GET  /api/tasks/next?annotator=ID   200 task | 204 none
///   POST /api/responses                 {task_id, annotator_id, answer, duration_ms}
///   GET  /api/progress
///   GET  /api/export                    JSON lines
///   GET  /api/images/{image_id}
class HttpServer {
 public:
  HttpServer(AnnotationService& service, HttpConfig config);
  ~HttpServer();

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace recd
