#pragma once

// Live annotation sessions over HTTP. Each session is persisted as an
// append-only JSONL event log; the in-memory state is always what replaying
// that log produces.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundwork/engine.hpp"
#include "groundwork/model.hpp"

namespace httplib {
class Server;
}

namespace groundwork {

class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message,
               nlohmann::ordered_json violations = nlohmann::ordered_json::array())
      : Error(message), status_(status), code_(std::move(code)), violations_(std::move(violations)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const nlohmann::ordered_json& violations() const { return violations_; }
  nlohmann::ordered_json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::ordered_json violations_;
};

struct LabelResult {
  TransitionReport report;
  std::vector<CguId> open;
  std::vector<CguRecord> cgus;
  std::size_t applied = 0;
};

nlohmann::ordered_json label_result_to_json(const LabelResult& result);

class SessionStore {
 public:
  /// Rebuilds every session found in data_dir by replaying its event log.
  explicit SessionStore(std::filesystem::path data_dir);
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Registers a transcript. Labels already present in it are applied as
  /// batches, in order, up to the last labeled utterance.
  std::string create(DialogAnnotation transcript);

  /// Applies the next utterance's labels. 404 unknown session, 409 out of
  /// order or rejected by the engine, 422 malformed labels.
  LabelResult post_labels(const std::string& session_id, UtteranceId utt_id,
                          std::vector<ActLabel> labels);

  /// Truncates the log at utt_id, replays, applies the new labels and marks
  /// the utterance revised.
  LabelResult revise(const std::string& session_id, UtteranceId utt_id, std::vector<ActLabel> labels);

  Replay timeline(const std::string& session_id) const;
  DialogAnnotation draft(const std::string& session_id) const;
  LabelResult state(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  std::vector<DialogAnnotation> drafts() const;

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Live;

  std::shared_ptr<Live> get(const std::string& session_id) const;
  void load(const std::filesystem::path& log_path);

  std::filesystem::path data_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::size_t next_id_ = 1;
};

struct ServerOptions {
  std::filesystem::path ui_dir;  // served at "/" when it exists
  std::map<std::string, std::vector<DialogAnnotation>> corpora;  // for /corpora/{name}/stats
};

/// Route table over a SessionStore. The store's live sessions are also
/// reachable as the corpus named "sessions".
class AnnotationServer {
 public:
  AnnotationServer(SessionStore& store, ServerOptions options = {});
  ~AnnotationServer();

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; call listen_after_bind() next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool running() const;

 private:
  void install_routes();

  SessionStore& store_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace groundwork
