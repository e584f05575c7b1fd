#include "percot/corpus.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace percot {

using nlohmann::json;

namespace {

std::string trim_copy(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace

const std::string& label_string(Label label) {
  static const std::string appropriate = "적절";
  static const std::string inappropriate = "부적절";
  return label == Label::Appropriate ? appropriate : inappropriate;
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "적절") return Label::Appropriate;
  if (text == "부적절") return Label::Inappropriate;
  return std::nullopt;
}

const std::string& split_name(Split split) {
  static const std::string names[] = {"train", "dev", "eval"};
  return names[static_cast<int>(split)];
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "eval") return Split::Eval;
  return std::nullopt;
}

std::size_t DialogueCorpus::utterance_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.utterances.size();
  return n;
}

DialogueCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("corpus file not found: " + path.string());

  DialogueCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed corpus record at line " + std::to_string(line_no) + ": " +
                      e.what());
    }

    auto fail = [&](const std::string& what) -> DataError {
      return DataError("malformed corpus record at line " + std::to_string(line_no) + ": " + what);
    };

    if (!record.is_object() || !record.contains("id") || !record.contains("utterances"))
      throw fail("expected object with \"id\" and \"utterances\"");

    Dialogue dialogue;
    dialogue.dialogue_id = record.at("id").get<std::string>();
    if (!record.at("utterances").is_array() || record.at("utterances").empty())
      throw fail("\"utterances\" must be a non-empty array");

    int turn = 0;
    for (const auto& u : record.at("utterances")) {
      Utterance utt;
      utt.turn_index = ++turn;
      if (!u.contains("id") || !u.contains("speaker") || !u.contains("text"))
        throw fail("utterance " + std::to_string(turn) + " needs \"id\", \"speaker\", \"text\"");
      utt.utterance_id = u.at("id").get<std::string>();
      utt.speaker_id = u.at("speaker").get<int>();
      utt.text = u.at("text").get<std::string>();
      if (trim_copy(utt.text).empty())
        throw fail("utterance " + utt.utterance_id + " has empty text");
      if (u.contains("label") && !u.at("label").is_null()) {
        const auto label_text = u.at("label").get<std::string>();
        auto label = parse_label(label_text);
        if (!label)
          throw fail("unknown label value \"" + label_text + "\" on utterance " +
                     utt.utterance_id);
        utt.label = *label;
      }
      dialogue.utterances.push_back(std::move(utt));
    }

    // Two speakers that take turns; deviations are worth a warning, nothing more.
    int distinct = 0;
    bool seen[3] = {false, false, false};
    bool alternates = true;
    for (std::size_t i = 0; i < dialogue.utterances.size(); ++i) {
      int sp = dialogue.utterances[i].speaker_id;
      if (sp < 1 || sp > 2)
        throw fail("utterance " + dialogue.utterances[i].utterance_id +
                   " has speaker index " + std::to_string(sp) + " (expected 1 or 2)");
      if (!seen[sp]) {
        seen[sp] = true;
        ++distinct;
      }
      if (i > 0 && dialogue.utterances[i - 1].speaker_id == sp) alternates = false;
    }
    (void)distinct;
    if (!alternates)
      corpus.warnings.push_back("dialog " + dialogue.dialogue_id +
                                ": speakers do not strictly alternate");

    corpus.dialogues.push_back(std::move(dialogue));
  }
  return corpus;
}

std::string render_full_dialog(const Dialogue& dialogue) {
  std::string out;
  for (std::size_t i = 0; i < dialogue.utterances.size(); ++i) {
    if (i) out += '\n';
    out += dialogue.utterances[i].utterance_id;
    out += ": ";
    out += dialogue.utterances[i].text;
  }
  return out;
}

std::vector<AnalysisInstance> transform_corpus(const DialogueCorpus& corpus) {
  std::vector<AnalysisInstance> instances;
  instances.reserve(corpus.utterance_count());
  for (const auto& dialogue : corpus.dialogues) {
    const std::string rendered = render_full_dialog(dialogue);
    for (const auto& utt : dialogue.utterances) {
      AnalysisInstance instance;
      instance.dialogue_id = dialogue.dialogue_id;
      instance.full_dialog = rendered;
      instance.target_utterance_id = utt.utterance_id;
      instance.target_text = utt.text;
      instance.gold_label = utt.label;
      instances.push_back(std::move(instance));
    }
  }
  return instances;
}

SplitStats corpus_stats(const DialogueCorpus& corpus,
                        const std::vector<AnalysisInstance>& instances, Split split) {
  if (instances.size() != corpus.utterance_count())
    throw DataError("instance list does not match corpus: " + std::to_string(instances.size()) +
                    " instances vs " + std::to_string(corpus.utterance_count()) + " utterances");
  SplitStats stats;
  stats.split = split;
  stats.dialog_count = corpus.dialog_count();
  stats.instance_count = instances.size();
  return stats;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<AnalysisInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write instance file: " + path.string());
  for (const auto& inst : instances) {
    json j{{"dialogue_id", inst.dialogue_id},
           {"full_dialog", inst.full_dialog},
           {"target_utterance_id", inst.target_utterance_id},
           {"target_text", inst.target_text}};
    if (inst.gold_label) j["gold_label"] = label_string(*inst.gold_label);
    out << j.dump() << '\n';
  }
}

std::vector<AnalysisInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("instance file not found: " + path.string());
  std::vector<AnalysisInstance> instances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_copy(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed instance record at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    AnalysisInstance inst;
    inst.dialogue_id = j.at("dialogue_id").get<std::string>();
    inst.full_dialog = j.at("full_dialog").get<std::string>();
    inst.target_utterance_id = j.at("target_utterance_id").get<std::string>();
    inst.target_text = j.at("target_text").get<std::string>();
    if (j.contains("gold_label")) {
      auto label = parse_label(j.at("gold_label").get<std::string>());
      if (!label)
        throw DataError("unknown label at line " + std::to_string(line_no) + " of " +
                        path.string());
      inst.gold_label = *label;
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace percot
