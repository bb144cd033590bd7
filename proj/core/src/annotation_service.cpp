#include "recd/annotation_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json_codec.hpp"

namespace recd {

using detail::json;

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(AssignmentState state) noexcept {
  switch (state) {
    case AssignmentState::Pending:
      return "pending";
    case AssignmentState::Served:
      return "served";
    case AssignmentState::Answered:
      return "answered";
    case AssignmentState::Expired:
      return "expired";
  }
  return "unknown";
}

struct AnnotationService::Event {
  std::uint64_t seq = 0;
  std::string kind;  // TaskCreated, Served, ResponseRecorded, Expired
  std::int64_t at = 0;
  json payload;
};

AnnotationService::AnnotationService(std::filesystem::path log_path, ServiceConfig config,
                                     Clock clock)
    : path_(std::move(log_path)), config_(config), clock_(std::move(clock)) {
  if (config_.lease_ms <= 0) throw std::invalid_argument("lease must be positive");
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  replay();
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw EventLogError("cannot open event log: " + std::string(std::strerror(errno)));
}

AnnotationService::~AnnotationService() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationService::replay() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t good_end = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = content.substr(pos, last ? std::string::npos : nl - pos);
    Event e;
    try {
      const json j = json::parse(line);
      e.seq = j.at("seq").get<std::uint64_t>();
      e.kind = j.at("kind").get<std::string>();
      e.at = j.at("at").get<std::int64_t>();
      e.payload = j.at("payload");
    } catch (const std::exception& ex) {
      // A crash mid-append leaves at most one torn record at the tail.
      if (last) break;
      throw EventLogError("corrupt event log record after seq " + std::to_string(seq_) + ": " +
                          ex.what());
    }
    if (last) {
      // Complete JSON but no newline: the append was not acknowledged.
      break;
    }
    if (e.seq != seq_ + 1) {
      throw EventLogError("event log sequence gap at " + std::to_string(e.seq));
    }
    apply(e);
    seq_ = e.seq;
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end < content.size()) std::filesystem::resize_file(path_, good_end);
}

void AnnotationService::apply(const Event& e) {
  if (e.kind == "TaskCreated") {
    Microtask t = detail::task_from_json(e.payload);
    auto& ts = tasks_[t.task_id];
    ts.task = std::move(t);
    ts.order = e.seq;
    return;
  }
  auto& ts = tasks_.at(e.payload.at("task_id").get<std::string>());
  const std::string annotator = e.payload.at("annotator_id").get<std::string>();
  auto& a = ts.assignments[annotator];
  if (e.kind == "Served") {
    a.state = AssignmentState::Served;
    a.served_at = e.at;
    ++ts.leased;
  } else if (e.kind == "Expired") {
    a.state = AssignmentState::Expired;
    --ts.leased;
  } else if (e.kind == "ResponseRecorded") {
    if (a.state == AssignmentState::Served) --ts.leased;
    a.state = AssignmentState::Answered;
    a.answered_at = e.at;
    a.response_seq = e.seq;
    ++ts.answered;
    AnnotatorResponse r;
    r.task_id = ts.task.task_id;
    r.annotator_id = annotator;
    r.answer = detail::answer_from_json(e.payload.at("answer"));
    r.duration_ms = e.payload.at("duration_ms").get<std::int64_t>();
    r.timestamp_ms = e.at;
    responses_.push_back(std::move(r));
  } else {
    throw EventLogError("unknown event kind: " + e.kind);
  }
}

void AnnotationService::append(Event& e) {
  e.seq = seq_ + 1;
  const json j = {{"seq", e.seq}, {"kind", e.kind}, {"at", e.at}, {"payload", e.payload}};
  const std::string line = j.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EventLogError("event log write failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
  if (config_.fsync && ::fdatasync(fd_) != 0) {
    throw EventLogError("event log sync failed: " + std::string(std::strerror(errno)));
  }
  apply(e);
  seq_ = e.seq;
}

void AnnotationService::expire_leases(std::int64_t now) {
  for (auto& [id, ts] : tasks_) {
    if (ts.leased == 0) continue;
    for (auto& [annotator, a] : ts.assignments) {
      if (a.state != AssignmentState::Served || now < a.served_at + config_.lease_ms) continue;
      Event e{0, "Expired", now, {{"task_id", id}, {"annotator_id", annotator}}};
      append(e);
    }
  }
}

std::size_t AnnotationService::add_tasks(std::span<const Microtask> tasks) {
  std::lock_guard lock(mu_);
  std::size_t added = 0;
  for (const auto& t : tasks) {
    if (tasks_.count(t.task_id)) continue;
    if (t.assignments < 1) throw std::invalid_argument("task needs at least one assignment");
    Event e{0, "TaskCreated", clock_(), detail::task_to_json(t)};
    append(e);
    ++added;
  }
  return added;
}

std::optional<Microtask> AnnotationService::next_task(const std::string& annotator_id) {
  if (annotator_id.empty()) throw std::invalid_argument("annotator id is required");
  std::lock_guard lock(mu_);
  const std::int64_t now = clock_();
  expire_leases(now);

  const TaskState* best = nullptr;
  for (const auto& [id, ts] : tasks_) {
    if (ts.answered + ts.leased >= ts.task.assignments) continue;
    if (ts.assignments.count(annotator_id)) continue;
    if (best == nullptr || ts.task.priority > best->task.priority ||
        (ts.task.priority == best->task.priority && ts.order < best->order)) {
      best = &ts;
    }
  }
  if (best == nullptr) return std::nullopt;
  Event e{0, "Served", now, {{"task_id", best->task.task_id}, {"annotator_id", annotator_id}}};
  append(e);
  return best->task;
}

SubmitResult AnnotationService::submit_response(const std::string& task_id,
                                                const std::string& annotator_id,
                                                const Answer& answer, std::int64_t duration_ms) {
  std::unique_lock lock(mu_);
  const std::int64_t now = clock_();
  expire_leases(now);

  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw UnknownAssignment("unknown task: " + task_id);
  const auto a = it->second.assignments.find(annotator_id);
  if (a == it->second.assignments.end()) {
    throw UnknownAssignment("task " + task_id + " was not served to " + annotator_id);
  }
  if (a->second.state == AssignmentState::Answered) return {a->second.response_seq, true};
  if (a->second.state != AssignmentState::Served) {
    throw UnknownAssignment("lease of " + annotator_id + " on " + task_id + " has expired");
  }
  if (!answer_valid_for(it->second.task.kind, answer)) {
    throw InvalidAnswer("answer not valid for a " + std::string(to_string(it->second.task.kind)) +
                        " task");
  }
  if (duration_ms < 0) throw InvalidAnswer("duration must not be negative");

  Event e{0,
          "ResponseRecorded",
          now,
          {{"task_id", task_id},
           {"annotator_id", annotator_id},
           {"answer", detail::answer_to_json(answer)},
           {"duration_ms", duration_ms}}};
  append(e);
  lock.unlock();
  answered_cv_.notify_all();
  return {e.seq, false};
}

Progress AnnotationService::progress() {
  std::lock_guard lock(mu_);
  expire_leases(clock_());
  Progress p;
  p.tasks = tasks_.size();
  for (const auto& [id, ts] : tasks_) {
    if (complete(ts)) ++p.completed_tasks;
    p.required_responses += static_cast<std::size_t>(ts.task.assignments);
    p.open_leases += static_cast<std::size_t>(ts.leased);
  }
  p.responses = responses_.size();
  return p;
}

std::vector<AnnotatorResponse> AnnotationService::export_responses(
    const std::optional<std::set<std::string>>& tasks) const {
  std::lock_guard lock(mu_);
  if (!tasks) return responses_;
  std::vector<AnnotatorResponse> out;
  for (const auto& r : responses_) {
    if (tasks->count(r.task_id)) out.push_back(r);
  }
  return out;
}

std::optional<Microtask> AnnotationService::task(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second.task;
}

std::optional<AssignmentState> AnnotationService::state(const std::string& task_id,
                                                        const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  const auto a = it->second.assignments.find(annotator_id);
  if (a == it->second.assignments.end()) return AssignmentState::Pending;
  return a->second.state;
}

bool AnnotationService::wait_for(const std::set<std::string>& task_ids,
                                 std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return answered_cv_.wait_for(lock, timeout, [&] {
    for (const auto& id : task_ids) {
      const auto it = tasks_.find(id);
      if (it == tasks_.end() || !complete(it->second)) return false;
    }
    return true;
  });
}

std::string AnnotationService::snapshot() const {
  std::lock_guard lock(mu_);
  json tasks = json::object();
  for (const auto& [id, ts] : tasks_) {
    json assignments = json::object();
    for (const auto& [annotator, a] : ts.assignments) {
      assignments[annotator] = {{"state", to_string(a.state)},
                                {"served_at", a.served_at},
                                {"answered_at", a.answered_at},
                                {"response_seq", a.response_seq}};
    }
    tasks[id] = {{"task", detail::task_to_json(ts.task)},
                 {"order", ts.order},
                 {"answered", ts.answered},
                 {"leased", ts.leased},
                 {"assignments", assignments}};
  }
  json responses = json::array();
  for (const auto& r : responses_) responses.push_back(detail::response_to_json(r));
  return json{{"seq", seq_}, {"tasks", tasks}, {"responses", responses}}.dump();
}

std::uint64_t AnnotationService::last_sequence() const {
  std::lock_guard lock(mu_);
  return seq_;
}

ServiceResponseSource::ServiceResponseSource(AnnotationService& service,
                                             std::chrono::milliseconds timeout)
    : service_(service), timeout_(timeout) {}

std::vector<AnnotatorResponse> ServiceResponseSource::collect(std::span<const Microtask> tasks) {
  service_.add_tasks(tasks);
  std::set<std::string> ids;
  for (const auto& t : tasks) ids.insert(t.task_id);
  if (!service_.wait_for(ids, timeout_)) timed_out_ = true;
  return service_.export_responses(ids);
}

struct HttpServer::Impl {
  AnnotationService& service;
  HttpConfig config;
  httplib::Server server;
  std::thread thread;

  Impl(AnnotationService& s, HttpConfig c) : service(s), config(std::move(c)) {}
};

namespace {

void send_error(httplib::Response& res, int status, std::string_view kind,
                std::string_view message) {
  res.status = status;
  res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
}

std::string_view image_mime(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

HttpServer::HttpServer(AnnotationService& service, HttpConfig config)
    : impl_(std::make_unique<Impl>(service, std::move(config))) {
  auto& svr = impl_->server;
  auto& svc = impl_->service;
  const int threads = std::max(1, impl_->config.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

  svr.Get("/api/tasks/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "BadRequest", "annotator is required");
    const auto task = svc.next_task(annotator);
    if (!task) {
      res.status = 204;
      return;
    }
    res.set_content(detail::task_to_json(*task).dump(), "application/json");
  });

  svr.Post("/api/responses", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::string task_id;
    std::string annotator;
    Answer answer;
    std::int64_t duration = 0;
    try {
      const json body = json::parse(req.body);
      task_id = body.at("task_id").get<std::string>();
      annotator = body.at("annotator_id").get<std::string>();
      duration = body.at("duration_ms").get<std::int64_t>();
      answer = detail::answer_from_json(body.at("answer"));
    } catch (const std::exception& e) {
      return send_error(res, 400, "InvalidAnswer", e.what());
    }
    try {
      const SubmitResult r = svc.submit_response(task_id, annotator, answer, duration);
      res.set_content(json{{"sequence", r.sequence}, {"duplicate", r.duplicate}}.dump(),
                      "application/json");
    } catch (const UnknownAssignment& e) {
      send_error(res, 409, "UnknownAssignment", e.what());
    } catch (const InvalidAnswer& e) {
      send_error(res, 400, "InvalidAnswer", e.what());
    } catch (const EventLogError& e) {
      send_error(res, 503, "StorageFailure", e.what());
    }
  });

  svr.Get("/api/progress", [&svc](const httplib::Request&, httplib::Response& res) {
    const Progress p = svc.progress();
    res.set_content(json{{"tasks", p.tasks},
                         {"completed_tasks", p.completed_tasks},
                         {"responses", p.responses},
                         {"required_responses", p.required_responses},
                         {"open_leases", p.open_leases}}
                        .dump(),
                    "application/json");
  });

  svr.Get("/api/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::set<std::string>> filter;
    if (req.has_param("task")) {
      filter.emplace();
      for (std::size_t i = 0; i < req.get_param_value_count("task"); ++i) {
        filter->insert(req.get_param_value("task", i));
      }
    }
    std::string body;
    for (const auto& r : svc.export_responses(filter)) {
      body += detail::response_to_json(r).dump();
      body += '\n';
    }
    res.set_content(body, "application/x-ndjson");
  });

  svr.Get(R"(/api/images/([A-Za-z0-9_.\-]+))",
          [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto& dir = impl_->config.image_dir;
            if (dir.empty() || id.find("..") != std::string::npos) {
              return send_error(res, 404, "NotFound", "no such image");
            }
            for (const char* ext : {"", ".png", ".jpg", ".jpeg"}) {
              const auto path = dir / (id + ext);
              if (!std::filesystem::is_regular_file(path)) continue;
              std::ifstream in(path, std::ios::binary);
              std::ostringstream buf;
              buf << in.rdbuf();
              res.set_content(buf.str(), std::string(image_mime(path)));
              return;
            }
            send_error(res, 404, "NotFound", "no such image: " + id);
          });

  if (!impl_->config.static_dir.empty() && std::filesystem::is_directory(impl_->config.static_dir)) {
    svr.set_mount_point("/", impl_->config.static_dir.string());
  }
}

HttpServer::~HttpServer() { stop(); }

namespace {

int bind_server(httplib::Server& svr, const HttpConfig& c) {
  if (c.port == 0) {
    const int port = svr.bind_to_any_port(c.host);
    if (port < 0) throw std::runtime_error("cannot bind " + c.host);
    return port;
  }
  if (!svr.bind_to_port(c.host, c.port)) {
    throw std::runtime_error("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return c.port;
}

}  // namespace

int HttpServer::start() {
  auto& svr = impl_->server;
  port_ = bind_server(svr, impl_->config);
  impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
  return port_;
}

void HttpServer::run() {
  port_ = bind_server(impl_->server, impl_->config);
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace recd
