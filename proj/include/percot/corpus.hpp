#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace percot {

// Raised for malformed corpus/instance files; the message names the offending
// record where possible.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label { Appropriate, Inappropriate };

const std::string& label_string(Label label);               // "적절" / "부적절"
std::optional<Label> parse_label(std::string_view text);    // exact match only

struct Utterance {
  int speaker_id = 0;          // 1 or 2
  int turn_index = 0;          // 1-based position within the dialog
  std::string utterance_id;    // e.g. "P1_3", "dev-00069-003"
  std::string text;
  std::optional<Label> label;  // absent on unlabeled evaluation data
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Utterance> utterances;
};

struct DialogueCorpus {
  std::vector<Dialogue> dialogues;
  std::vector<std::string> warnings;  // soft findings, e.g. speakers not alternating

  std::size_t dialog_count() const { return dialogues.size(); }
  std::size_t utterance_count() const;
};

// One classification unit: the whole dialog plus one target utterance.
struct AnalysisInstance {
  std::string dialogue_id;
  std::string full_dialog;  // one "<utterance_id>: <text>" line per utterance
  std::string target_utterance_id;
  std::string target_text;
  std::optional<Label> gold_label;
};

enum class Split { Train, Dev, Eval };

const std::string& split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct SplitStats {
  Split split = Split::Train;
  std::size_t dialog_count = 0;
  std::size_t instance_count = 0;
};

// Loads a line-delimited corpus file. One JSON object per line:
//   {"id": "...", "utterances": [{"id": "...", "speaker": 1, "text": "...", "label": "적절"}, ...]}
// The label field may be omitted (unlabeled evaluation data). Unknown label
// strings, empty utterance text and structural problems raise DataError.
DialogueCorpus load_corpus(const std::filesystem::path& path);

std::string render_full_dialog(const Dialogue& dialogue);

// Expands every dialog into one instance per utterance, in (dialog, turn) order.
std::vector<AnalysisInstance> transform_corpus(const DialogueCorpus& corpus);

// Throws DataError when `instances` was not produced from `corpus`.
SplitStats corpus_stats(const DialogueCorpus& corpus,
                        const std::vector<AnalysisInstance>& instances,
                        Split split);

void write_instances(const std::filesystem::path& path,
                     const std::vector<AnalysisInstance>& instances);
std::vector<AnalysisInstance> read_instances(const std::filesystem::path& path);

}  // namespace percot
