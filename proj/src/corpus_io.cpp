#include "groundwork/corpus_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace groundwork {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Non-empty trimmed items of a ';'-separated cell.
std::vector<std::string> list_cell(std::string_view cell) {
  std::vector<std::string> out;
  if (trim(cell).empty()) return out;
  for (auto& part : split(cell, ';')) out.push_back(trim(part));
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

ordered_json number_json(double v) {
  if (std::floor(v) == v && std::fabs(v) < 9e15) return static_cast<std::int64_t>(v);
  return v;
}

ordered_json optional_string(const std::optional<std::string>& s) {
  return s ? ordered_json(*s) : ordered_json(nullptr);
}

std::vector<std::string> flag_names(const UtteranceFlags& f) {
  std::vector<std::string> out;
  if (f.revised) out.emplace_back("revised");
  if (f.overlap) out.emplace_back("overlap");
  if (f.murmur) out.emplace_back("murmur");
  return out;
}

void set_flag(UtteranceFlags& f, std::string_view name) {
  std::string key = trim(name);
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (key == "revised" || key == "*") {
    f.revised = true;
  } else if (key == "overlap" || key == "#") {
    f.overlap = true;
  } else if (key == "murmur" || key == "m") {
    f.murmur = true;
  } else {
    throw Error("unknown flag '" + std::string(name) + "'");
  }
}

void finish_dialogs(CorpusFile& file) {
  std::set<std::string> seen;
  for (const auto& d : file.dialogs) {
    if (!seen.insert(d.dialog_id).second) {
      throw InvariantViolation(d.dialog_id, "dialog id repeats; a dialog's rows must be contiguous");
    }
    check_invariants(d);
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

// TSV text cells escape backslash, tab and newline.
std::string escape_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_cell(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      out += n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

const std::vector<std::string> kTsvColumns = {"ts",       "speaker",     "text",   "acts", "cgus",
                                              "open_cgus", "closed_cgus", "degree", "flags"};

void check_tsv_id(const std::string& id, const std::string& dialog_id) {
  if (id.find_first_of(";>\t\n()") != std::string::npos || id == "-" || trim(id) != id) {
    throw IoError("dialog '" + dialog_id + "': CGU id '" + id + "' cannot be written to TSV");
  }
}

// ACT[(Ambiguous)][>LINK]
std::string act_cell_entry(const ActLabel& l) {
  std::string s(canonical_name(l.act));
  if (l.degree_override) s += "(" + std::string(degree_name(*l.degree_override)) + ")";
  if (l.link_cgu) s += ">" + *l.link_cgu;
  return s;
}

ActLabel parse_act_entry(const std::string& entry, UtteranceId uid) {
  ActLabel label;
  label.utterance_id = uid;
  std::string act_part = entry;
  if (auto gt = act_part.find('>'); gt != std::string::npos) {
    label.link_cgu = trim(act_part.substr(gt + 1));
    act_part = act_part.substr(0, gt);
  }
  if (auto lp = act_part.find('('); lp != std::string::npos) {
    auto rp = act_part.find(')', lp);
    if (rp == std::string::npos) throw Error("unbalanced '(' in act '" + entry + "'");
    label.degree_override = parse_degree(act_part.substr(lp + 1, rp - lp - 1));
    act_part = act_part.substr(0, lp);
  }
  label.act = parse_act(trim(act_part));
  return label;
}

}  // namespace

double parse_timestamp(std::string_view stamp) {
  const std::string s = trim(stamp);
  if (s.size() < 5 || s.front() != '[' || s.back() != ']') throw BadTimestamp(s);
  const auto fields = split(std::string_view(s).substr(1, s.size() - 2), ':');
  if (fields.size() != 2 && fields.size() != 3) throw BadTimestamp(s);

  auto integer = [&](const std::string& f, bool two_digits) -> double {
    if (f.empty() || (two_digits && f.size() != 2)) throw BadTimestamp(s);
    for (char c : f) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw BadTimestamp(s);
    }
    return std::stod(f);
  };

  // Seconds: exactly two digits, optional fraction.
  const std::string& sec_field = fields.back();
  const auto dot = sec_field.find('.');
  double seconds = integer(sec_field.substr(0, dot), true);
  if (dot != std::string::npos) {
    const std::string frac = sec_field.substr(dot + 1);
    integer(frac, false);
    seconds += std::stod("0." + frac);
  }
  if (seconds >= 60) throw BadTimestamp(s);

  if (fields.size() == 2) return integer(fields[0], false) * 60 + seconds;
  const double minutes = integer(fields[1], true);
  if (minutes >= 60) throw BadTimestamp(s);
  return integer(fields[0], false) * 3600 + minutes * 60 + seconds;
}

std::string format_timestamp(double seconds) {
  if (seconds < 0 || !std::isfinite(seconds)) throw BadTimestamp(std::to_string(seconds));
  const auto whole = static_cast<long long>(std::floor(seconds));
  const double frac = seconds - static_cast<double>(whole);
  const long long h = whole / 3600, m = (whole % 3600) / 60, s = whole % 60;
  char buf[64];
  if (h > 0) {
    std::snprintf(buf, sizeof buf, "[%lld:%02lld:%02lld", h, m, s);
  } else {
    std::snprintf(buf, sizeof buf, "[%02lld:%02lld", m, s);
  }
  std::string out = buf;
  if (frac > 0) {
    // Shortest round-trip spelling of the whole value supplies the fraction.
    char digits[64];
    auto [end, ec] = std::to_chars(digits, digits + sizeof digits, seconds);
    std::string_view repr(digits, static_cast<std::size_t>(end - digits));
    if (auto dot = repr.find('.'); ec == std::errc{} && dot != std::string_view::npos) {
      out += repr.substr(dot);
    }
  }
  return out + "]";
}

CorpusFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".tsv" || ext == ".tab") ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

// ---------------------------------------------------------------------------
// JSON shapes

ordered_json label_to_json(const ActLabel& l) {
  ordered_json j;
  j["cgu"] = optional_string(l.cgu);
  j["act"] = std::string(canonical_name(l.act));
  j["degree"] = l.degree_override ? ordered_json(std::string(degree_name(*l.degree_override)))
                                  : ordered_json(nullptr);
  j["link"] = optional_string(l.link_cgu);
  return j;
}

ActLabel label_from_json(const json& j, UtteranceId utterance_id) {
  if (!j.is_object()) throw Error("label must be an object");
  ActLabel l;
  l.utterance_id = utterance_id;
  if (!j.contains("act") || !j["act"].is_string()) throw Error("label needs a string 'act'");
  l.act = parse_act(j["act"].get<std::string>());
  auto opt = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw Error(std::string("label field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  l.cgu = opt("cgu");
  if (auto d = opt("degree")) l.degree_override = parse_degree(*d);
  l.link_cgu = opt("link");
  return l;
}

ordered_json utterance_to_json(const DialogAnnotation& dialog, const Utterance& u,
                               std::span<const ActLabel> labels) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["dialog_id"] = dialog.dialog_id;
  j["corpus"] = std::string(corpus_tag_name(dialog.corpus));
  j["utt_id"] = u.id;
  j["speaker"] = u.speaker;
  j["ts"] = u.timestamp ? number_json(*u.timestamp) : ordered_json(nullptr);
  j["text"] = u.text;
  j["flags"] = flag_names(u.flags);
  j["labels"] = ordered_json::array();
  for (const auto& l : labels) j["labels"].push_back(label_to_json(l));
  return j;
}

ordered_json report_to_json(const TransitionReport& r) {
  ordered_json j;
  j["utt_id"] = r.utterance_id;
  j["opened"] = r.opened;
  j["closed"] = ordered_json::array();
  for (const auto& c : r.closed) {
    j["closed"].push_back({{"cgu", c.cgu}, {"degree", std::string(degree_name(c.degree))}});
  }
  j["reopened"] = r.reopened;
  j["canceled"] = r.canceled;
  j["warnings"] = ordered_json::array();
  for (const auto& w : r.warnings) {
    j["warnings"].push_back(
        {{"kind", std::string(warning_name(w.kind))}, {"cgu", w.cgu}, {"message", w.message}});
  }
  return j;
}

ordered_json timeline_row_to_json(const std::string& dialog_id, const TimelineRow& row) {
  ordered_json j;
  j["dialog_id"] = dialog_id;
  j["utt_id"] = row.utterance.id;
  j["speaker"] = row.utterance.speaker;
  j["ts"] = row.utterance.timestamp ? number_json(*row.utterance.timestamp) : ordered_json(nullptr);
  j["text"] = row.utterance.text;
  j["flags"] = flag_names(row.utterance.flags);
  j["labels"] = ordered_json::array();
  for (const auto& l : row.labels) j["labels"].push_back(label_to_json(l));
  j["open_after"] = row.open_after;
  j["closed_here"] = ordered_json::array();
  for (const auto& c : row.closed_here) {
    j["closed_here"].push_back({{"cgu", c.cgu}, {"degree", std::string(degree_name(c.degree))}});
  }
  j["reopened_here"] = row.reopened_here;
  j["canceled_here"] = row.canceled_here;
  j["warnings"] = ordered_json::array();
  for (const auto& w : row.warnings) {
    j["warnings"].push_back(
        {{"kind", std::string(warning_name(w.kind))}, {"cgu", w.cgu}, {"message", w.message}});
  }
  return j;
}

ordered_json cgu_to_json(const CguRecord& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["status"] = std::string(status_name(rec.status));
  j["degree"] = rec.degree ? ordered_json(std::string(degree_name(*rec.degree))) : ordered_json(nullptr);
  j["reopen_count"] = rec.reopen_count;
  j["prior_degree"] =
      rec.prior_degree ? ordered_json(std::string(degree_name(*rec.prior_degree))) : ordered_json(nullptr);
  j["members"] = ordered_json::array();
  for (const auto& m : rec.members) {
    j["members"].push_back({{"utt_id", m.utterance_id}, {"act", std::string(canonical_name(m.act))}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// JSONL

CorpusFile read_jsonl(std::istream& in, const std::string& source) {
  CorpusFile file;
  file.source_path = source;
  file.format = CorpusFormat::Jsonl;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      if (!j.is_object()) throw Error("expected a JSON object");
      if (j.contains("format_version") && j["format_version"].get<int>() > kFormatVersion) {
        throw Error("unsupported format_version " + j["format_version"].dump());
      }
      const std::string dialog_id = j.at("dialog_id").get<std::string>();
      if (file.dialogs.empty() || file.dialogs.back().dialog_id != dialog_id) {
        DialogAnnotation d;
        d.dialog_id = dialog_id;
        file.dialogs.push_back(std::move(d));
      }
      DialogAnnotation& dialog = file.dialogs.back();
      const CorpusTag tag =
          j.contains("corpus") && !j["corpus"].is_null() ? parse_corpus_tag(j["corpus"].get<std::string>())
                                                         : CorpusTag::Other;
      if (dialog.utterances.empty()) {
        dialog.corpus = tag;
      } else if (dialog.corpus != tag) {
        throw Error("corpus tag changes within dialog '" + dialog_id + "'");
      }

      Utterance u;
      u.id = j.at("utt_id").get<UtteranceId>();
      u.speaker = j.at("speaker").get<std::string>();
      u.text = j.at("text").get<std::string>();
      if (j.contains("ts") && !j["ts"].is_null()) {
        u.timestamp = j["ts"].is_string() ? parse_timestamp(j["ts"].get<std::string>())
                                          : j["ts"].get<double>();
      }
      if (j.contains("flags")) {
        for (const auto& f : j["flags"]) set_flag(u.flags, f.get<std::string>());
      }
      if (j.contains("labels")) {
        for (const auto& lj : j["labels"]) dialog.labels.push_back(label_from_json(lj, u.id));
      }
      dialog.utterances.push_back(std::move(u));
    } catch (const InvariantViolation&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  finish_dialogs(file);
  return file;
}

CorpusFile read_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_jsonl(in, path.string());
}

void write_jsonl(std::span<const DialogAnnotation> dialogs, std::ostream& out) {
  for (const auto& d : dialogs) {
    const auto grouped = labels_by_utterance(d);
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      out << utterance_to_json(d, d.utterances[i], grouped[i]).dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed");
}

void write_jsonl(std::span<const DialogAnnotation> dialogs, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_jsonl(dialogs, out);
}

std::string to_jsonl(std::span<const DialogAnnotation> dialogs) {
  std::ostringstream os;
  write_jsonl(dialogs, os);
  return os.str();
}

void write_timeline_jsonl(std::span<const DialogAnnotation> dialogs, std::ostream& out) {
  for (const auto& d : dialogs) {
    for (const auto& row : replay(d).rows) out << timeline_row_to_json(d.dialog_id, row).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// TSV

CorpusFile read_tsv(std::istream& in, const std::string& source) {
  CorpusFile file;
  file.source_path = source;
  file.format = CorpusFormat::Tsv;

  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  bool have_header = false;

  auto current = [&]() -> DialogAnnotation& {
    if (file.dialogs.empty()) {
      DialogAnnotation d;
      d.dialog_id = std::filesystem::path(source).stem().string();
      file.dialogs.push_back(std::move(d));
    }
    return file.dialogs.back();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (trim(line).empty()) continue;
      const auto names = split(line, '\t');
      for (std::size_t i = 0; i < names.size(); ++i) col[trim(names[i])] = i;
      for (const char* required : {"speaker", "text", "acts", "cgus"}) {
        if (!col.count(required)) throw ParseError(line_no, std::string("header lacks column '") + required + "'");
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string directive = trim(std::string_view(line).substr(1));
      if (directive.rfind("dialog:", 0) == 0) {
        DialogAnnotation d;
        d.dialog_id = trim(std::string_view(directive).substr(7));
        if (d.dialog_id.empty()) throw ParseError(line_no, "empty dialog id");
        file.dialogs.push_back(std::move(d));
      } else if (directive.rfind("corpus:", 0) == 0) {
        try {
          current().corpus = parse_corpus_tag(trim(std::string_view(directive).substr(7)));
        } catch (const std::exception& e) {
          throw ParseError(line_no, e.what());
        }
      }
      continue;  // other '#' lines are comments
    }

    const auto cells = split(line, '\t');
    auto cell = [&](const std::string& name) -> std::string {
      auto it = col.find(name);
      if (it == col.end() || it->second >= cells.size()) return "";
      return cells[it->second];
    };

    DialogAnnotation& dialog = current();
    try {
      Utterance u;
      u.id = dialog.utterances.size();
      u.speaker = unescape_cell(trim(cell("speaker")));
      u.text = unescape_cell(cell("text"));
      if (auto ts = trim(cell("ts")); !ts.empty()) u.timestamp = parse_timestamp(ts);
      for (char c : cell("flags")) {
        if (c == '*' || c == '#') set_flag(u.flags, std::string(1, c));
      }
      for (const auto& word : split(cell("flags"), ' ')) {
        std::string w = trim(word);
        std::erase_if(w, [](char c) { return c == '*' || c == '#'; });
        if (!w.empty()) set_flag(u.flags, w);
      }

      const auto acts = list_cell(cell("acts"));
      const auto cgus = list_cell(cell("cgus"));
      if (acts.size() != cgus.size()) {
        throw Error("acts and cgus columns list different numbers of entries");
      }
      std::vector<ActLabel> row_labels;
      for (std::size_t k = 0; k < acts.size(); ++k) {
        ActLabel l = parse_act_entry(acts[k], u.id);
        if (cgus[k] != "-" && !cgus[k].empty()) l.cgu = cgus[k];
        row_labels.push_back(std::move(l));
      }

      if (col.count("open_cgus") || col.count("closed_cgus")) {
        RowAssertion a;
        a.open_cgus = list_cell(cell("open_cgus"));
        const auto closed = list_cell(cell("closed_cgus"));
        const auto degrees = list_cell(cell("degree"));
        if (!degrees.empty() && degrees.size() != closed.size()) {
          throw Error("degree column must align with closed_cgus");
        }
        for (std::size_t k = 0; k < closed.size(); ++k) {
          std::optional<Degree> deg;
          if (k < degrees.size() && !degrees[k].empty()) deg = parse_degree(degrees[k]);
          a.closed_cgus.emplace_back(closed[k], deg);
          // An Ambiguous entry in the degree column is the annotator's override,
          // unless an act entry on that CGU already says so.
          if (deg == Degree::Ambiguous) {
            auto acks = [&](const ActLabel& l) { return l.cgu == closed[k] && is_acknowledging(l.act); };
            const bool marked = std::any_of(row_labels.begin(), row_labels.end(),
                                            [&](const ActLabel& l) { return acks(l) && l.degree_override; });
            auto first = std::find_if(row_labels.begin(), row_labels.end(), acks);
            if (!marked && first != row_labels.end()) first->degree_override = Degree::Ambiguous;
          }
        }
        dialog.assertions.resize(dialog.utterances.size());
        dialog.assertions.push_back(std::move(a));
      }
      for (auto& l : row_labels) dialog.labels.push_back(std::move(l));
      dialog.utterances.push_back(std::move(u));
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }

  // A "# dialog:" directive with no rows contributes nothing.
  std::erase_if(file.dialogs, [](const DialogAnnotation& d) { return d.utterances.empty(); });
  for (auto& d : file.dialogs) {
    if (!d.assertions.empty()) d.assertions.resize(d.utterances.size());
  }
  finish_dialogs(file);
  return file;
}

CorpusFile read_tsv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tsv(in, path.string());
}

void write_tsv(std::span<const DialogAnnotation> dialogs, std::ostream& out) {
  out << join(kTsvColumns, "\t") << '\n';
  for (const auto& d : dialogs) {
    if (d.dialog_id.empty() || d.dialog_id.find('\n') != std::string::npos) {
      throw IoError("dialog id cannot be written to TSV");
    }
    out << "# dialog: " << d.dialog_id << '\n';
    out << "# corpus: " << corpus_tag_name(d.corpus) << '\n';
    const Replay rep = replay(d);
    for (const TimelineRow& row : rep.rows) {
      std::vector<std::string> acts, cgus, closed, degrees, flags;
      for (const auto& l : row.labels) {
        if (l.cgu) check_tsv_id(*l.cgu, d.dialog_id);
        if (l.link_cgu) check_tsv_id(*l.link_cgu, d.dialog_id);
        acts.push_back(act_cell_entry(l));
        cgus.push_back(l.cgu.value_or("-"));
      }
      for (const auto& c : row.closed_here) {
        closed.push_back(c.cgu);
        degrees.emplace_back(degree_name(c.degree));
      }
      const auto& u = row.utterance;
      if (u.flags.revised) flags.emplace_back("*");
      if (u.flags.overlap) flags.emplace_back("#");
      if (u.flags.murmur) flags.emplace_back("murmur");
      out << (u.timestamp ? format_timestamp(*u.timestamp) : "") << '\t' << escape_cell(u.speaker)
          << '\t' << escape_cell(u.text) << '\t' << join(acts, ";") << '\t' << join(cgus, ";")
          << '\t' << join(row.open_after, ";") << '\t' << join(closed, ";") << '\t'
          << join(degrees, ";") << '\t' << join(flags, " ") << '\n';
    }
  }
  if (!out) throw IoError("write failed");
}

void write_tsv(std::span<const DialogAnnotation> dialogs, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_tsv(dialogs, out);
}

std::string to_tsv(std::span<const DialogAnnotation> dialogs) {
  std::ostringstream os;
  write_tsv(dialogs, os);
  return os.str();
}

CorpusFile read_corpus(const std::filesystem::path& path, std::optional<CorpusFormat> format) {
  const CorpusFormat f = format.value_or(format_for_path(path));
  return f == CorpusFormat::Tsv ? read_tsv(path) : read_jsonl(path);
}

}  // namespace groundwork
