#pragma once

// Reading and writing annotated corpora: canonical JSONL (one utterance per
// line) and the tab-separated annotation table with derived Open/Closed CGU
// columns. See docs/format.md.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundwork/engine.hpp"
#include "groundwork/model.hpp"

namespace groundwork {

inline constexpr int kFormatVersion = 1;

class BadTimestamp : public Error {
 public:
  explicit BadTimestamp(const std::string& stamp) : Error("bad timestamp: '" + stamp + "'") {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line_no, const std::string& reason)
      : Error("line " + std::to_string(line_no) + ": " + reason), line_no_(line_no) {}
  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class CorpusFormat { Jsonl, Tsv };

struct CorpusFile {
  std::vector<DialogAnnotation> dialogs;
  std::string source_path;
  CorpusFormat format = CorpusFormat::Jsonl;
};

/// "[mm:ss]", "[m+:ss]" or "[h:mm:ss]", seconds optionally fractional.
double parse_timestamp(std::string_view stamp);
/// Inverse of parse_timestamp: "[mm:ss]" below one hour, "[h:mm:ss]" above.
std::string format_timestamp(double seconds);

CorpusFormat format_for_path(const std::filesystem::path& path);

CorpusFile read_jsonl(std::istream& in, const std::string& source = "<stream>");
CorpusFile read_jsonl(const std::filesystem::path& path);
CorpusFile read_tsv(std::istream& in, const std::string& source = "<stream>");
CorpusFile read_tsv(const std::filesystem::path& path);
CorpusFile read_corpus(const std::filesystem::path& path, std::optional<CorpusFormat> format = {});

void write_jsonl(std::span<const DialogAnnotation> dialogs, std::ostream& out);
void write_jsonl(std::span<const DialogAnnotation> dialogs, const std::filesystem::path& path);
/// Writes the annotation table; the derived columns come from replay, so the
/// dialogs must replay without engine errors.
void write_tsv(std::span<const DialogAnnotation> dialogs, std::ostream& out);
void write_tsv(std::span<const DialogAnnotation> dialogs, const std::filesystem::path& path);

std::string to_jsonl(std::span<const DialogAnnotation> dialogs);
std::string to_tsv(std::span<const DialogAnnotation> dialogs);

// JSON shapes shared by the file writer, the timeline export and the service.
nlohmann::ordered_json label_to_json(const ActLabel& label);
ActLabel label_from_json(const nlohmann::json& j, UtteranceId utterance_id);
nlohmann::ordered_json utterance_to_json(const DialogAnnotation& dialog, const Utterance& utt,
                                         std::span<const ActLabel> labels);
nlohmann::ordered_json report_to_json(const TransitionReport& report);
nlohmann::ordered_json timeline_row_to_json(const std::string& dialog_id, const TimelineRow& row);
nlohmann::ordered_json cgu_to_json(const CguRecord& rec);

/// One JSON object per utterance row of every dialog's replay.
void write_timeline_jsonl(std::span<const DialogAnnotation> dialogs, std::ostream& out);

}  // namespace groundwork
