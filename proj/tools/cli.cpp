#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "groundwork/analytics.hpp"
#include "groundwork/corpus_io.hpp"
#include "groundwork/dataset.hpp"
#include "groundwork/engine.hpp"
#include "groundwork/report.hpp"
#include "groundwork/service.hpp"
#include "groundwork/validate.hpp"

namespace groundwork::cli {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { Debug, Info, Warn, Error, Off };

LogLevel log_level() {
  const char* env = std::getenv("GROUNDWORK_LOG");
  const std::string v = env ? env : "warn";
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  if (v == "error") return LogLevel::Error;
  if (v == "off") return LogLevel::Off;
  return LogLevel::Warn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const { emit(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::Debug, "debug", msg); }

 private:
  void emit(LogLevel at, const char* tag, const std::string& msg) const {
    if (at >= level_ && level_ != LogLevel::Off) err_ << "[" << tag << "] " << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

struct Options {
  std::vector<std::string> inputs;
  std::string format;  // empty: by extension
  std::string out;
  std::uint64_t seed = 0;
  double threshold_factor = 1.0;
  std::string table = "all";
  bool json = false;
  std::string emit = "tsv";
  std::string marker = "<special_token>";
  std::string separator = "</s>";
  std::size_t max_history = 0;
  std::vector<unsigned> ratios = {70, 15, 15};
  int port = 7340;
  std::string host = "127.0.0.1";
  std::string data_dir = "groundwork-sessions";
  std::string ui_dir;
  std::vector<std::string> corpora;
};

std::optional<CorpusFormat> parse_format(const std::string& f) {
  if (f.empty()) return std::nullopt;
  return f == "tsv" ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

std::vector<DialogAnnotation> load_all(const Options& o, const Log& log) {
  std::vector<DialogAnnotation> dialogs;
  for (const auto& path : o.inputs) {
    auto file = read_corpus(path, parse_format(o.format));
    log.info("read " + std::to_string(file.dialogs.size()) + " dialogs from " + path);
    for (auto& d : file.dialogs) dialogs.push_back(std::move(d));
  }
  return dialogs;
}

void with_output(const Options& o, std::ostream& out, const std::function<void(std::ostream&)>& body) {
  if (o.out.empty()) {
    body(out);
    return;
  }
  std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write '" + o.out + "'");
  body(file);
  if (!file) throw IoError("write to '" + o.out + "' failed");
}

int cmd_validate(const Options& o, std::ostream& out, const Log& log) {
  const auto dialogs = load_all(o, log);
  ResponseProfile profile;
  bool timed = false;
  for (const auto& d : dialogs) {
    for (const auto& u : d.utterances) timed = timed || u.timestamp.has_value();
  }
  if (timed) profile = response_time_profile(dialogs);

  ValidateOptions vo;
  vo.profile = timed ? &profile : nullptr;
  vo.threshold_factor = o.threshold_factor;
  std::size_t errors = 0, warnings = 0;
  with_output(o, out, [&](std::ostream& os) {
    for (const auto& d : dialogs) {
      for (const auto& f : validate(d, vo)) {
        (f.severity == Severity::Error ? errors : warnings)++;
        os << format_finding(f) << '\n';
      }
    }
    os << errors << " errors, " << warnings << " warnings\n";
  });
  return errors ? 1 : 0;
}

int cmd_replay(const Options& o, std::ostream& out, const Log& log) {
  const auto dialogs = load_all(o, log);
  with_output(o, out, [&](std::ostream& os) {
    if (o.emit == "jsonl") {
      write_timeline_jsonl(dialogs, os);
    } else {
      write_tsv(dialogs, os);
    }
  });
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out, const Log& log) {
  const auto dialogs = load_all(o, log);
  const bool acts = o.table == "acts" || o.table == "all";
  const bool traj = o.table == "trajectory" || o.table == "all";
  const ActHistogram hist = act_histogram(dialogs);
  std::optional<TrajectoryStats> trajectory;
  if (traj) trajectory = trajectory_stats(dialogs);

  with_output(o, out, [&](std::ostream& os) {
    if (o.json) {
      nlohmann::ordered_json j;
      j["dialogs"] = dialogs.size();
      if (acts) j["acts"] = histogram_to_json(hist);
      if (trajectory) j["trajectory"] = trajectory_to_json(*trajectory);
      if (auto note = percentage_note(dialogs); !note.empty()) {
        j["note"] = note.substr(0, note.size() - 1);
      }
      os << j.dump(2) << '\n';
      return;
    }
    if (acts) {
      os << format_act_table(hist);
      os << percentage_note(dialogs);
    }
    if (acts && trajectory) os << '\n';
    if (trajectory) os << format_trajectory(*trajectory);
  });
  return 0;
}

int cmd_kappa(const Options& o, std::ostream& out, const Log& log) {
  if (o.inputs.size() != 2) throw CLI::ValidationError("kappa", "needs exactly two annotation files");
  const auto a = read_corpus(o.inputs[0], parse_format(o.format)).dialogs;
  const auto b = read_corpus(o.inputs[1], parse_format(o.format)).dialogs;
  const KappaInput paired = align_primary_acts(a, b);
  const double kappa = cohen_kappa(paired.rater_a, paired.rater_b);
  log.debug("paired " + std::to_string(paired.rater_a.size()) + " utterances");
  with_output(o, out, [&](std::ostream& os) {
    if (o.json) {
      os << nlohmann::ordered_json{{"kappa", kappa}, {"utterances", paired.rater_a.size()}}.dump() << '\n';
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", kappa);
      os << "kappa " << buf << " over " << paired.rater_a.size() << " utterances\n";
    }
  });
  return 0;
}

EncoderConfig encoder_config(const Options& o) {
  EncoderConfig cfg;
  cfg.focal_marker = o.marker;
  cfg.separator = o.separator;
  cfg.max_history = o.max_history;
  return cfg;
}

int cmd_encode(const Options& o, std::ostream& out, const Log& log) {
  const auto dialogs = load_all(o, log);
  const auto instances = build_instances(dialogs, encoder_config(o));
  with_output(o, out, [&](std::ostream& os) {
    for (const auto& inst : instances) os << instance_to_json(inst).dump() << '\n';
  });
  log.info("wrote " + std::to_string(instances.size()) + " instances");
  return 0;
}

void write_instances(const fs::path& path, const std::vector<EncodedInstance>& instances) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& inst : instances) file << instance_to_json(inst).dump() << '\n';
}

int cmd_split(const Options& o, std::ostream& out, const Log& log) {
  if (o.inputs.size() != 1) throw CLI::ValidationError("split", "needs one instance file");
  if (o.ratios.size() != 3) throw CLI::ValidationError("--ratios", "needs three values");
  std::ifstream in(o.inputs[0]);
  if (!in) throw IoError("cannot open '" + o.inputs[0] + "'");
  std::vector<EncodedInstance> instances;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      instances.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  const DatasetSplit split = stratified_split(instances, {o.ratios[0], o.ratios[1], o.ratios[2]}, o.seed);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  write_instances(dir / "train.jsonl", split.train);
  write_instances(dir / "dev.jsonl", split.dev);
  write_instances(dir / "test.jsonl", split.test);

  nlohmann::ordered_json weights = nlohmann::ordered_json::object();
  for (const auto& [act, w] : class_weights(split.train)) weights[std::string(canonical_name(act))] = w;
  {
    std::ofstream wf(dir / "class_weights.json", std::ios::binary | std::ios::trunc);
    wf << weights.dump(2) << '\n';
  }
  log.info("split written to " + dir.string());
  out << "train " << split.train.size() << ", dev " << split.dev.size() << ", test " << split.test.size()
      << " (seed " << o.seed << ")\n";
  return 0;
}

AnnotationServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, std::ostream& out, const Log& log) {
  ServerOptions so;
  so.ui_dir = o.ui_dir;
  for (const auto& spec : o.corpora) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--corpus", "expected NAME=PATH");
    so.corpora[spec.substr(0, eq)] = read_corpus(spec.substr(eq + 1), parse_format(o.format)).dialogs;
  }
  SessionStore store(o.data_dir);
  AnnotationServer server(store, std::move(so));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  out << "listening on http://" << o.host << ":" << o.port << " (sessions in " << o.data_dir << ")"
      << std::endl;
  log.info(std::to_string(store.session_ids().size()) + " sessions recovered");
  const bool ok = server.listen(o.host, o.port);
  g_server = nullptr;
  return ok ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"groundwork: grounding-act annotation toolkit", "groundwork"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI config file; flags override it");

  Options o;
  const Log log(err);
  std::function<int()> action;

  auto input_opts = [&](CLI::App* sub, bool many) {
    auto* opt = sub->add_option("inputs", o.inputs, many ? "annotation files" : "annotation file")->required();
    if (!many) opt->expected(1);
    sub->add_option("--format", o.format, "input format (default: by extension)")
        ->check(CLI::IsMember({"jsonl", "tsv"}));
    sub->add_option("-o,--out", o.out, "output path (default: stdout)");
  };

  auto* validate_cmd = app.add_subcommand("validate", "check annotations against the coding rules");
  input_opts(validate_cmd, true);
  validate_cmd->add_option("--threshold-factor", o.threshold_factor, "response-time feasibility factor")
      ->check(CLI::PositiveNumber);
  validate_cmd->callback([&] { action = [&] { return cmd_validate(o, out, log); }; });

  auto* replay_cmd = app.add_subcommand("replay", "replay annotations into the Open/Closed CGU table");
  input_opts(replay_cmd, true);
  replay_cmd->add_option("--emit", o.emit, "tsv table or jsonl timeline")->check(CLI::IsMember({"tsv", "jsonl"}));
  replay_cmd->callback([&] { action = [&] { return cmd_replay(o, out, log); }; });

  auto* stats_cmd = app.add_subcommand("stats", "act histogram and grounding trajectory statistics");
  input_opts(stats_cmd, true);
  stats_cmd->add_option("--table", o.table, "acts, trajectory or all")
      ->check(CLI::IsMember({"acts", "trajectory", "all"}));
  stats_cmd->add_flag("--json", o.json, "emit JSON");
  stats_cmd->callback([&] { action = [&] { return cmd_stats(o, out, log); }; });

  auto* kappa_cmd = app.add_subcommand("kappa", "Cohen's kappa between two annotations of the same dialogs");
  input_opts(kappa_cmd, true);
  kappa_cmd->add_flag("--json", o.json, "emit JSON");
  kappa_cmd->callback([&] { action = [&] { return cmd_kappa(o, out, log); }; });

  auto* encode_cmd = app.add_subcommand("encode", "per-CGU classifier instances as JSONL");
  input_opts(encode_cmd, true);
  encode_cmd->add_option("--marker", o.marker, "focal CGU marker token");
  encode_cmd->add_option("--separator", o.separator, "separator token");
  encode_cmd->add_option("--max-history", o.max_history, "history window in utterances (0: all)");
  encode_cmd->callback([&] { action = [&] { return cmd_encode(o, out, log); }; });

  auto* split_cmd = app.add_subcommand("split", "stratified train/dev/test split of encoded instances");
  split_cmd->add_option("inputs", o.inputs, "instance JSONL from 'encode'")->required()->expected(1);
  split_cmd->add_option("-o,--out", o.out, "output directory");
  split_cmd->add_option("--seed", o.seed, "shuffle seed");
  split_cmd->add_option("--ratios", o.ratios, "train dev test percentages")->expected(3)->delimiter(',');
  split_cmd->callback([&] { action = [&] { return cmd_split(o, out, log); }; });

  auto* serve_cmd = app.add_subcommand("serve", "HTTP annotation service");
  serve_cmd->add_option("--port", o.port, "listen port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", o.host, "listen address");
  serve_cmd->add_option("--data-dir", o.data_dir, "session event logs");
  serve_cmd->add_option("--ui-dir", o.ui_dir, "built annotation UI assets");
  serve_cmd->add_option("--corpus", o.corpora, "NAME=PATH corpus for /corpora/NAME/stats");
  serve_cmd->add_option("--format", o.format, "corpus format")->check(CLI::IsMember({"jsonl", "tsv"}));
  serve_cmd->callback([&] { action = [&] { return cmd_serve(o, out, log); }; });

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace groundwork::cli
