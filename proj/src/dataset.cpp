#include "groundwork/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "groundwork/corpus_io.hpp"
#include "groundwork/engine.hpp"

namespace groundwork {

namespace {

EncodedInstance render(std::span<const Utterance> history, const Memberships& memberships,
                       const FocalCgu& focal, const Utterance& next_utt,
                       std::optional<GroundingAct> label, const EncoderConfig& config) {
  const std::string& sep = config.separator;
  const std::string& mark = config.focal_marker;
  std::string text;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) text += sep;
    bool focal_member = false;
    if (focal) {
      auto it = memberships.find(history[i].id);
      focal_member = it != memberships.end() && it->second.count(*focal);
    }
    if (focal_member) text += mark;
    text += render_utterance(history[i]);
    if (focal_member) text += mark;
  }
  text += sep;
  text += sep;
  text += render_utterance(next_utt);
  text += sep;
  if (label) {
    text += canonical_name(*label);
    text += sep;
  }
  EncodedInstance inst;
  inst.utterance_id = next_utt.id;
  inst.focal = focal;
  inst.input_text = std::move(text);
  inst.label = label;
  inst.history_len = history.size();
  return inst;
}

}  // namespace

std::string render_utterance(const Utterance& utt) {
  std::string out;
  if (utt.timestamp) out = format_timestamp(*utt.timestamp) + " ";
  out += utt.speaker;
  out += ": ";
  out += utt.text;
  return out;
}

EncodedInstance encode_instance(std::span<const Utterance> history, const Memberships& memberships,
                                const FocalCgu& focal, const Utterance& next_utt,
                                std::optional<GroundingAct> label, const EncoderConfig& config) {
  if (focal) {
    bool present = std::any_of(history.begin(), history.end(), [&](const Utterance& u) {
      auto it = memberships.find(u.id);
      return it != memberships.end() && it->second.count(*focal);
    });
    if (!present) throw FocalNotInHistory(*focal);
  }
  return render(history, memberships, focal, next_utt, label, config);
}

std::vector<EncodedInstance> build_instances(std::span<const DialogAnnotation> corpus,
                                             const EncoderConfig& config) {
  std::vector<EncodedInstance> out;
  for (const auto& dialog : corpus) {
    const Replay rep = replay(dialog);
    Memberships memberships;
    for (const auto& label : dialog.labels) {
      if (label.cgu && label.act != GroundingAct::None) memberships[label.utterance_id].insert(*label.cgu);
    }
    const std::span<const Utterance> utts(dialog.utterances);

    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const TimelineRow& row = rep.rows[i];
      std::size_t begin = 0;
      if (config.max_history && i > config.max_history) begin = i - config.max_history;
      const auto history = utts.subspan(begin, i - begin);

      static const std::vector<CguId> kNone;
      const std::vector<CguId>& open_before = i ? rep.rows[i - 1].open_after : kNone;
      for (const CguId& id : open_before) {
        GroundingAct act = GroundingAct::None;
        for (const auto& l : row.labels) {
          if (l.cgu == id) {
            act = l.act;
            break;
          }
        }
        auto inst = render(history, memberships, id, row.utterance, act, config);
        inst.dialog_id = dialog.dialog_id;
        out.push_back(std::move(inst));
      }

      const bool initiates = std::any_of(row.labels.begin(), row.labels.end(), [](const ActLabel& l) {
        return l.act == GroundingAct::Initiate;
      });
      auto fresh = render(history, memberships, std::nullopt, row.utterance,
                          initiates ? GroundingAct::Initiate : GroundingAct::None, config);
      fresh.dialog_id = dialog.dialog_id;
      out.push_back(std::move(fresh));
    }
  }
  return out;
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios) {
  const std::array<unsigned, 3> r = {ratios.train, ratios.dev, ratios.test};
  const unsigned total = r[0] + r[1] + r[2];
  std::array<std::size_t, 3> share{};
  std::array<std::size_t, 3> remainder{};  // in units of 1/total
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    share[k] = n * r[k] / total;
    remainder[k] = n * r[k] % total;
    assigned += share[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++share[order[k]];
  return share;
}

DatasetSplit stratified_split(std::span<const EncodedInstance> instances, const SplitRatios& ratios,
                              std::uint64_t seed) {
  if (instances.empty()) throw DatasetError("split: no instances");
  if (ratios.train + ratios.dev + ratios.test != 100) {
    throw DatasetError("split: ratios must sum to 100");
  }

  // Stratum key: label index, with unlabeled instances in their own stratum.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const int key = instances[i].label ? static_cast<int>(*instances[i].label) : -1;
    strata[key].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<int> assignment(instances.size(), 0);
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto share = apportion(members.size(), ratios);
    std::size_t pos = 0;
    for (int part = 0; part < 3; ++part) {
      for (std::size_t n = 0; n < share[part]; ++n) assignment[members[pos++]] = part;
    }
  }

  DatasetSplit split;
  std::array<std::vector<EncodedInstance>*, 3> parts = {&split.train, &split.dev, &split.test};
  for (std::size_t i = 0; i < instances.size(); ++i) parts[assignment[i]]->push_back(instances[i]);
  return split;
}

nlohmann::ordered_json instance_to_json(const EncodedInstance& inst) {
  nlohmann::ordered_json j;
  j["input"] = inst.input_text;
  j["label"] = inst.label ? nlohmann::ordered_json(std::string(canonical_name(*inst.label)))
                          : nlohmann::ordered_json(nullptr);
  j["dialog_id"] = inst.dialog_id;
  j["utt_id"] = inst.utterance_id;
  j["focal"] = inst.focal ? nlohmann::ordered_json(*inst.focal) : nlohmann::ordered_json(nullptr);
  return j;
}

EncodedInstance instance_from_json(const nlohmann::json& j) {
  EncodedInstance inst;
  inst.input_text = j.at("input").get<std::string>();
  if (j.contains("label") && !j["label"].is_null()) inst.label = parse_act(j["label"].get<std::string>());
  inst.dialog_id = j.at("dialog_id").get<std::string>();
  inst.utterance_id = j.at("utt_id").get<UtteranceId>();
  if (j.contains("focal") && !j["focal"].is_null()) inst.focal = j["focal"].get<std::string>();
  return inst;
}

std::map<GroundingAct, double> class_weights(std::span<const EncodedInstance> train) {
  std::map<GroundingAct, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& inst : train) {
    if (!inst.label) continue;
    ++counts[*inst.label];
    ++total;
  }
  if (total == 0) throw DatasetError("class weights: no labeled instances");
  std::map<GroundingAct, double> weights;
  const double k = static_cast<double>(counts.size());
  for (const auto& [label, n] : counts) {
    weights[label] = static_cast<double>(total) / (k * static_cast<double>(n));
  }
  return weights;
}

}  // namespace groundwork
