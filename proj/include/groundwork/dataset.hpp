#pragma once

// Per-CGU classification instances for grounding-act classifiers: the
// history / next-utterance text encoding, stratified splits and class weights.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundwork/model.hpp"

namespace groundwork {

class DatasetError : public Error {
 public:
  using Error::Error;
};

class FocalNotInHistory : public DatasetError {
 public:
  explicit FocalNotInHistory(const CguId& id)
      : DatasetError("focal CGU '" + id + "' has no member in the history") {}
};

struct EncoderConfig {
  std::string focal_marker = "<special_token>";
  std::string separator = "</s>";
  /// Most recent utterances kept as history; 0 keeps the whole prefix.
  std::size_t max_history = 0;
};

/// nullopt stands for a CGU the next utterance would initiate.
using FocalCgu = std::optional<CguId>;

struct EncodedInstance {
  std::string dialog_id;
  UtteranceId utterance_id = 0;
  FocalCgu focal;
  std::string input_text;
  std::optional<GroundingAct> label;  // absent at inference time
  std::size_t history_len = 0;

  friend bool operator==(const EncodedInstance&, const EncodedInstance&) = default;
};

using Memberships = std::map<UtteranceId, std::set<CguId>>;

/// "[mm:ss] Speaker: text", or "Speaker: text" when untimed.
std::string render_utterance(const Utterance& utt);

/// History utterances joined by the separator, focal-CGU members wrapped in
/// the marker, then separator twice, the next utterance, separator, and, when
/// labeled, the canonical label name and a final separator.
EncodedInstance encode_instance(std::span<const Utterance> history, const Memberships& memberships,
                                const FocalCgu& focal, const Utterance& next_utt,
                                std::optional<GroundingAct> label = {},
                                const EncoderConfig& config = {});

/// One instance per (utterance, CGU open before it) plus one fresh-CGU
/// instance per utterance. Order: dialog, utterance, CGU creation, fresh last.
std::vector<EncodedInstance> build_instances(std::span<const DialogAnnotation> corpus,
                                             const EncoderConfig& config = {});

struct SplitRatios {
  unsigned train = 70;
  unsigned dev = 15;
  unsigned test = 15;
};

struct DatasetSplit {
  std::vector<EncodedInstance> train;
  std::vector<EncodedInstance> dev;
  std::vector<EncodedInstance> test;
};

/// Per-label allotment of n instances over the three ratios: floors first,
/// leftovers to the largest remainders, so each share is within one instance
/// of the exact value.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios);

/// Shuffles each label stratum with a generator seeded by `seed` and deals it
/// out by apportion(); splits keep input order.
DatasetSplit stratified_split(std::span<const EncodedInstance> instances,
                              const SplitRatios& ratios = {}, std::uint64_t seed = 0);

/// {input, label, dialog_id, utt_id, focal}; focal is null for a fresh CGU.
nlohmann::ordered_json instance_to_json(const EncodedInstance& inst);
EncodedInstance instance_from_json(const nlohmann::json& j);

/// Balanced weights N / (K * n_c) over the labels present in `train`.
std::map<GroundingAct, double> class_weights(std::span<const EncodedInstance> train);

}  // namespace groundwork
