#include "groundwork/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>

#include <httplib.h>

#include "groundwork/analytics.hpp"
#include "groundwork/corpus_io.hpp"
#include "groundwork/report.hpp"

namespace groundwork {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write to '" + path.string() + "' failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void append_durable(const fs::path& path, const std::string& line) {
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  try {
    write_all(fd, line, path);
    if (::fsync(fd) != 0) throw IoError("fsync '" + path.string() + "' failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

// Write-then-rename so a crash leaves either the old or the new log.
void replace_durable(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_TRUNC | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open '" + tmp.string() + "': " + std::strerror(errno));
  try {
    write_all(fd, content, tmp);
    if (::fsync(fd) != 0) throw IoError("fsync '" + tmp.string() + "' failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, path);
  int dir = ::open(path.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dir >= 0) {
    ::fsync(dir);
    ::close(dir);
  }
}

ordered_json transcript_to_json(const DialogAnnotation& d) {
  ordered_json j;
  j["dialog_id"] = d.dialog_id;
  j["corpus"] = std::string(corpus_tag_name(d.corpus));
  j["utterances"] = ordered_json::array();
  for (const auto& u : d.utterances) {
    ordered_json uj = utterance_to_json(d, u, {});
    uj.erase("format_version");
    uj.erase("dialog_id");
    uj.erase("corpus");
    uj.erase("labels");
    j["utterances"].push_back(std::move(uj));
  }
  return j;
}

// Accepts {dialog_id, corpus, utterances: [{utt_id?, speaker, ts, text, flags, labels?}]}.
DialogAnnotation transcript_from_json(const json& j) {
  if (!j.is_object()) throw ServiceError(422, "MalformedBody", "transcript must be an object");
  DialogAnnotation d;
  try {
    d.dialog_id = j.value("dialog_id", std::string("dialog"));
    if (j.contains("corpus") && j["corpus"].is_string()) d.corpus = parse_corpus_tag(j["corpus"].get<std::string>());
    if (!j.contains("utterances") || !j["utterances"].is_array()) {
      throw ServiceError(422, "MalformedBody", "transcript needs an 'utterances' array");
    }
    // Reuse the corpus reader so both entry points enforce the same rules.
    std::string lines;
    std::size_t ordinal = 0;
    for (const auto& uj : j["utterances"]) {
      json line = uj;
      line["dialog_id"] = d.dialog_id;
      line["corpus"] = std::string(corpus_tag_name(d.corpus));
      if (!line.contains("utt_id")) line["utt_id"] = ordinal;
      if (!line.contains("text")) line["text"] = "";
      ++ordinal;
      lines += line.dump() + "\n";
    }
    std::istringstream in(lines);
    auto file = read_jsonl(in, "transcript");
    if (!file.dialogs.empty()) d = std::move(file.dialogs.front());
  } catch (const ServiceError&) {
    throw;
  } catch (const std::exception& e) {
    throw ServiceError(422, "MalformedBody", e.what());
  }
  return d;
}

std::vector<ActLabel> labels_from_body(const json& body, UtteranceId utt_id) {
  if (!body.is_object() || !body.contains("labels") || !body["labels"].is_array()) {
    throw ServiceError(422, "MalformedBody", "body needs a 'labels' array");
  }
  std::vector<ActLabel> labels;
  ordered_json violations = ordered_json::array();
  for (const auto& lj : body["labels"]) {
    try {
      ActLabel l = label_from_json(lj, utt_id);
      if (auto problem = label_problem(l)) {
        violations.push_back({{"severity", "error"}, {"code", "InvalidLabel"}, {"message", *problem}});
      }
      labels.push_back(std::move(l));
    } catch (const std::exception& e) {
      violations.push_back({{"severity", "error"}, {"code", "MalformedLabel"}, {"message", e.what()}});
    }
  }
  if (!violations.empty()) {
    throw ServiceError(422, "MalformedBody", "labels violate annotation rules", violations);
  }
  return labels;
}

ordered_json batch_event(UtteranceId utt_id, std::span<const ActLabel> labels, bool revised) {
  ordered_json j;
  j["event"] = "labels";
  j["utt_id"] = utt_id;
  j["revised"] = revised;
  j["labels"] = ordered_json::array();
  for (const auto& l : labels) j["labels"].push_back(label_to_json(l));
  return j;
}

ServiceError engine_conflict(const EngineError& e) {
  ordered_json violations = ordered_json::array();
  violations.push_back({{"severity", "error"},
                        {"code", std::string(engine_error_name(e.kind()))},
                        {"cgu", e.cgu()},
                        {"message", e.what()}});
  return ServiceError(409, std::string(engine_error_name(e.kind())), e.what(), violations);
}

}  // namespace

ordered_json ServiceError::body() const {
  ordered_json j;
  j["error"] = what();
  j["code"] = code_;
  j["violations"] = violations_;
  return j;
}

ordered_json label_result_to_json(const LabelResult& r) {
  ordered_json j;
  j["report"] = report_to_json(r.report);
  j["open"] = r.open;
  j["cgus"] = ordered_json::array();
  for (const auto& c : r.cgus) j["cgus"].push_back(cgu_to_json(c));
  j["applied"] = r.applied;
  return j;
}

// ---------------------------------------------------------------------------

struct SessionStore::Live {
  std::string id;
  fs::path log_path;
  DialogAnnotation draft;  // transcript plus applied labels
  std::vector<std::vector<ActLabel>> batches;
  Session engine;
  TransitionReport last_report;
  mutable std::shared_mutex mutex;

  void rebuild_labels() {
    draft.labels.clear();
    for (const auto& b : batches) draft.labels.insert(draft.labels.end(), b.begin(), b.end());
  }

  LabelResult result() const {
    return {last_report, engine.open_cgus(), engine.cgus(), batches.size()};
  }

  ordered_json create_event() const {
    ordered_json j;
    j["event"] = "create";
    j["session_id"] = id;
    j["transcript"] = transcript_to_json(draft);
    return j;
  }

  // Applies one batch to the next utterance; throws EngineError, mutates nothing on failure.
  TransitionReport apply_next(std::vector<ActLabel> labels, Session& target) const {
    const Utterance& utt = draft.utterances[batches.size()];
    return target.apply(utt, labels);
  }
};

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_);
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(data_dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".log") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) load(p);
}

SessionStore::~SessionStore() = default;

void SessionStore::load(const fs::path& log_path) {
  std::ifstream in(log_path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) return;

  auto live = std::make_shared<Live>();
  live->log_path = log_path;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      // A torn final line is a batch that was never acknowledged.
      if (i + 1 == lines.size()) break;
      throw IoError("corrupt event log '" + log_path.string() + "' at line " + std::to_string(i + 1));
    }
    const std::string event = j.value("event", "");
    if (i == 0) {
      if (event != "create") throw IoError("event log '" + log_path.string() + "' lacks a create event");
      live->id = j.at("session_id").get<std::string>();
      live->draft = transcript_from_json(j.at("transcript"));
      live->engine = Session(live->draft.dialog_id);
      continue;
    }
    if (event != "labels") continue;
    const UtteranceId utt_id = j.at("utt_id").get<UtteranceId>();
    std::vector<ActLabel> labels;
    for (const auto& lj : j.at("labels")) labels.push_back(label_from_json(lj, utt_id));
    if (live->batches.size() >= live->draft.utterances.size() ||
        live->draft.utterances[live->batches.size()].id != utt_id) {
      throw IoError("event log '" + log_path.string() + "' is out of order at line " + std::to_string(i + 1));
    }
    if (j.value("revised", false)) live->draft.utterances[live->batches.size()].flags.revised = true;
    live->last_report = live->apply_next(labels, live->engine);
    live->batches.push_back(std::move(labels));
  }
  live->rebuild_labels();

  std::unique_lock lock(mutex_);
  const std::string digits = live->id.substr(live->id.find_first_of("0123456789") == std::string::npos
                                                 ? live->id.size()
                                                 : live->id.find_first_of("0123456789"));
  if (!digits.empty()) next_id_ = std::max(next_id_, std::stoul(digits) + 1);
  sessions_[live->id] = std::move(live);
}

std::shared_ptr<SessionStore::Live> SessionStore::get(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServiceError(404, "UnknownSession", "no session '" + session_id + "'");
  return it->second;
}

std::string SessionStore::create(DialogAnnotation transcript) {
  try {
    check_invariants(transcript);
  } catch (const InvariantViolation& e) {
    throw ServiceError(422, "InvariantViolation", e.what());
  }

  auto live = std::make_shared<Live>();
  {
    std::unique_lock lock(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%04zu", next_id_++);
    live->id = buf;
  }
  live->log_path = data_dir_ / (live->id + ".log");

  auto grouped = labels_by_utterance(transcript);
  std::size_t labeled_prefix = 0;
  for (std::size_t i = 0; i < grouped.size(); ++i) {
    if (!grouped[i].empty()) labeled_prefix = i + 1;
  }
  live->draft = std::move(transcript);
  live->draft.labels.clear();
  live->draft.assertions.clear();
  live->engine = Session(live->draft.dialog_id);

  std::string log = live->create_event().dump() + "\n";
  for (std::size_t i = 0; i < labeled_prefix; ++i) {
    try {
      live->last_report = live->apply_next(grouped[i], live->engine);
    } catch (const EngineError& e) {
      throw engine_conflict(e);
    }
    log += batch_event(live->draft.utterances[i].id, grouped[i], false).dump() + "\n";
    live->batches.push_back(std::move(grouped[i]));
  }
  live->rebuild_labels();
  replace_durable(live->log_path, log);

  std::unique_lock lock(mutex_);
  sessions_[live->id] = live;
  return live->id;
}

LabelResult SessionStore::post_labels(const std::string& session_id, UtteranceId utt_id,
                                      std::vector<ActLabel> labels) {
  auto live = get(session_id);
  std::unique_lock lock(live->mutex);
  const std::size_t next = live->batches.size();
  if (next >= live->draft.utterances.size()) {
    throw ServiceError(409, "OutOfOrderUtterance", "every utterance is already labeled");
  }
  const UtteranceId expected = live->draft.utterances[next].id;
  if (utt_id != expected) {
    throw ServiceError(409, "OutOfOrderUtterance",
                       "expected labels for utterance " + std::to_string(expected) + ", got " +
                           std::to_string(utt_id));
  }
  for (auto& l : labels) l.utterance_id = utt_id;

  Session candidate = live->engine;
  TransitionReport report;
  try {
    report = live->apply_next(labels, candidate);
  } catch (const EngineError& e) {
    throw engine_conflict(e);
  }
  append_durable(live->log_path, batch_event(utt_id, labels, false).dump() + "\n");

  live->engine = std::move(candidate);
  live->last_report = report;
  live->draft.labels.insert(live->draft.labels.end(), labels.begin(), labels.end());
  live->batches.push_back(std::move(labels));
  return live->result();
}

LabelResult SessionStore::revise(const std::string& session_id, UtteranceId utt_id,
                                 std::vector<ActLabel> labels) {
  auto live = get(session_id);
  std::unique_lock lock(live->mutex);
  const auto& utts = live->draft.utterances;
  auto it = std::find_if(utts.begin(), utts.end(), [&](const Utterance& u) { return u.id == utt_id; });
  if (it == utts.end()) throw ServiceError(404, "UnknownUtterance", "no utterance " + std::to_string(utt_id));
  const auto pos = static_cast<std::size_t>(it - utts.begin());
  if (pos >= live->batches.size()) {
    throw ServiceError(409, "OutOfOrderUtterance",
                       "utterance " + std::to_string(utt_id) + " has not been labeled yet");
  }
  for (auto& l : labels) l.utterance_id = utt_id;

  Session rebuilt(live->draft.dialog_id);
  TransitionReport report;
  try {
    for (std::size_t i = 0; i < pos; ++i) rebuilt.apply(utts[i], live->batches[i]);
    report = rebuilt.apply(utts[pos], labels);
  } catch (const EngineError& e) {
    throw engine_conflict(e);
  }

  std::string log = live->create_event().dump() + "\n";
  for (std::size_t i = 0; i < pos; ++i) {
    log += batch_event(utts[i].id, live->batches[i], utts[i].flags.revised).dump() + "\n";
  }
  log += batch_event(utt_id, labels, true).dump() + "\n";
  replace_durable(live->log_path, log);

  live->batches.resize(pos);
  live->batches.push_back(std::move(labels));
  live->draft.utterances[pos].flags.revised = true;
  live->engine = std::move(rebuilt);
  live->last_report = report;
  live->rebuild_labels();
  return live->result();
}

Replay SessionStore::timeline(const std::string& session_id) const {
  return replay(draft(session_id));
}

DialogAnnotation SessionStore::draft(const std::string& session_id) const {
  auto live = get(session_id);
  std::shared_lock lock(live->mutex);
  return live->draft;
}

LabelResult SessionStore::state(const std::string& session_id) const {
  auto live = get(session_id);
  std::shared_lock lock(live->mutex);
  return live->result();
}

std::vector<std::string> SessionStore::session_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, live] : sessions_) ids.push_back(id);
  return ids;
}

std::vector<DialogAnnotation> SessionStore::drafts() const {
  std::vector<DialogAnnotation> out;
  for (const auto& id : session_ids()) out.push_back(draft(id));
  return out;
}

// ---------------------------------------------------------------------------

AnnotationServer::AnnotationServer(SessionStore& store, ServerOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

bool AnnotationServer::listen(const std::string& host, int port) { return server_->listen(host, port); }
int AnnotationServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool AnnotationServer::listen_after_bind() { return server_->listen_after_bind(); }
void AnnotationServer::stop() {
  if (server_) server_->stop();
}
bool AnnotationServer::running() const { return server_->is_running(); }

void AnnotationServer::install_routes() {
  auto& srv = *server_;

  auto send = [](httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  // Wraps a handler with the error-to-status mapping.
  auto guarded = [send](auto handler) {
    return [send, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ServiceError& e) {
        send(res, e.status(), e.body());
      } catch (const json::exception& e) {
        send(res, 422, ServiceError(422, "MalformedBody", e.what()).body());
      } catch (const std::exception& e) {
        send(res, 500, ServiceError(500, "Internal", e.what()).body());
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ServiceError(422, "MalformedBody", e.what());
    }
  };
  auto parse_utt = [](const std::string& text) -> UtteranceId {
    try {
      std::size_t used = 0;
      unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return static_cast<UtteranceId>(v);
    } catch (const std::exception&) {
      throw ServiceError(422, "MalformedBody", "bad utterance id '" + text + "'");
    }
  };

  srv.Post("/sessions", guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    DialogAnnotation transcript;
    if (body.is_object() && body.contains("jsonl")) {
      std::istringstream in(body["jsonl"].get<std::string>());
      CorpusFile file;
      try {
        file = read_jsonl(in, "upload");
      } catch (const std::exception& e) {
        throw ServiceError(422, "MalformedBody", e.what());
      }
      if (file.dialogs.size() != 1) throw ServiceError(422, "MalformedBody", "upload must hold exactly one dialog");
      transcript = std::move(file.dialogs.front());
    } else {
      transcript = transcript_from_json(body.is_object() && body.contains("transcript") ? body["transcript"] : body);
    }
    const std::string id = store_.create(std::move(transcript));
    ordered_json out = label_result_to_json(store_.state(id));
    out["session_id"] = id;
    send(res, 201, out);
  }));

  srv.Get("/sessions", guarded([this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, ordered_json{{"sessions", store_.session_ids()}});
  }));

  srv.Get(R"(/sessions/([^/]+))", guarded([this, send](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const DialogAnnotation d = store_.draft(id);
    ordered_json out = label_result_to_json(store_.state(id));
    out["session_id"] = id;
    out["dialog_id"] = d.dialog_id;
    out["utterances"] = ordered_json::array();
    const auto grouped = labels_by_utterance(d);
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      out["utterances"].push_back(utterance_to_json(d, d.utterances[i], grouped[i]));
    }
    send(res, 200, out);
  }));

  srv.Post(R"(/sessions/([^/]+)/labels)",
           guarded([this, send, parse_body](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             if (!body.is_object() || !body.contains("utt_id") || !body["utt_id"].is_number_unsigned()) {
               throw ServiceError(422, "MalformedBody", "body needs a non-negative integer 'utt_id'");
             }
             const auto utt_id = body["utt_id"].get<UtteranceId>();
             auto labels = labels_from_body(body, utt_id);
             send(res, 200, label_result_to_json(store_.post_labels(req.matches[1], utt_id, std::move(labels))));
           }));

  srv.Put(R"(/sessions/([^/]+)/labels/([^/]+))",
          guarded([this, send, parse_body, parse_utt](const httplib::Request& req, httplib::Response& res) {
            const UtteranceId utt_id = parse_utt(req.matches[2]);
            auto labels = labels_from_body(parse_body(req), utt_id);
            send(res, 200, label_result_to_json(store_.revise(req.matches[1], utt_id, std::move(labels))));
          }));

  srv.Get(R"(/sessions/([^/]+)/timeline)", guarded([this, send](const httplib::Request& req, httplib::Response& res) {
    const DialogAnnotation d = store_.draft(req.matches[1]);
    ordered_json rows = ordered_json::array();
    for (const auto& row : replay(d).rows) rows.push_back(timeline_row_to_json(d.dialog_id, row));
    send(res, 200, ordered_json{{"dialog_id", d.dialog_id}, {"rows", rows}});
  }));

  srv.Get(R"(/sessions/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "jsonl";
    const std::vector<DialogAnnotation> one{store_.draft(req.matches[1])};
    if (format == "jsonl") {
      res.set_content(to_jsonl(one), "application/x-ndjson");
    } else if (format == "tsv") {
      res.set_content(to_tsv(one), "text/tab-separated-values");
    } else {
      throw ServiceError(422, "MalformedBody", "format must be jsonl or tsv");
    }
  }));

  srv.Get(R"(/corpora/([^/]+)/stats)", guarded([this, send](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    std::vector<DialogAnnotation> corpus;
    if (auto it = options_.corpora.find(name); it != options_.corpora.end()) {
      corpus = it->second;
    } else if (name == "sessions") {
      corpus = store_.drafts();
    } else {
      throw ServiceError(404, "UnknownCorpus", "no corpus '" + name + "'");
    }
    ordered_json out;
    out["corpus"] = name;
    out["dialogs"] = corpus.size();
    out["acts"] = histogram_to_json(act_histogram(corpus));
    try {
      out["trajectory"] = trajectory_to_json(trajectory_stats(corpus));
    } catch (const EngineError& e) {
      throw ServiceError(409, std::string(engine_error_name(e.kind())), e.what());
    }
    send(res, 200, out);
  }));

  if (!options_.ui_dir.empty() && fs::is_directory(options_.ui_dir)) {
    srv.set_mount_point("/", options_.ui_dir.string());
  }
}

}  // namespace groundwork
