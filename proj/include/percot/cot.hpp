#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "percot/corpus.hpp"
#include "percot/prompts.hpp"

namespace percot {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

// A finished training target: "<think>…</think><answer>…</answer>".
struct TaggedTarget {
  std::string think_text;
  Label answer_label = Label::Appropriate;
  std::string rendered;
};

// Throws DataError when think_text contains "</think>" or "<answer>", which
// would corrupt the tag grammar.
TaggedTarget wrap_training_target(const std::string& think_text, Label label);

enum class ParseErrorKind { MissingThink, MissingAnswer, UnknownLabel, NestedOrDuplicateTags };

std::string_view parse_error_name(ParseErrorKind kind);

struct TaggedOutput {
  std::string think_text;
  Label answer_label = Label::Appropriate;
};

struct TagParseError {
  ParseErrorKind kind = ParseErrorKind::MissingThink;
  std::string detail;  // e.g. the unknown label string
};

using ParseResult = std::variant<TaggedOutput, TagParseError>;

// Total over arbitrary byte strings; never throws. Extracts the first
// well-formed think block and the first answer block after it; anything after
// "</answer>" is ignored.
ParseResult parse_tagged_output(std::string_view text);

struct ValidationReport {
  bool label_consistent = false;
  bool perspectives_covered = false;
  bool within_sentence_budget = false;
  std::vector<std::string> issues;

  bool passed() const {
    return label_consistent && perspectives_covered && within_sentence_budget;
  }
};

struct CoTRecord {
  AnalysisInstance instance;
  std::string teacher_text;
  Label gold_label = Label::Appropriate;
  TaggedTarget target;
  ValidationReport validation;
  std::string prompt_hash;
  bool from_cache = false;
  std::string generation_error;  // non-empty when the teacher call failed

  bool generated() const { return generation_error.empty(); }
};

// Number of sentences in a segment: maximal runs of '.', '?', '!' or '…'
// count once each.
int count_sentences(std::string_view segment);

// Splits think text at "1."/"관점 1." style markers. Returns the segment
// texts for the markers found (marker excluded); *all_found reports whether
// markers 1..k were all present, in order.
std::vector<std::string> split_perspective_segments(std::string_view think_text, int k,
                                                    bool* all_found);

// Structural validation against k perspectives. k = 0 skips the coverage and
// budget checks (unconstrained reasoning).
ValidationReport validate_cot_record(const CoTRecord& record, int k);

enum class TargetMode { BareLabel, Tagged };

struct SftExample {
  std::string system;
  std::string user;
  std::string target;
};

struct AssembleOptions {
  bool keep_invalid = false;
  TargetMode mode = TargetMode::Tagged;
};

struct AssembleSummary {
  std::size_t total = 0;
  std::size_t retained = 0;
  std::map<std::string, std::size_t> dropped_by_reason;
};

struct AssembledDataset {
  std::vector<SftExample> examples;
  AssembleSummary summary;
};

// Builds one (system, user, target) example per retained record. Records that
// failed generation are always dropped; invalid records are dropped unless
// keep_invalid. Throws DataError when nothing is retained.
AssembledDataset assemble_sft_dataset(const std::vector<CoTRecord>& records,
                                      const PerspectiveSet& perspectives,
                                      const AssembleOptions& options);

void write_sft_dataset(const std::filesystem::path& path,
                       const std::vector<SftExample>& examples);
std::vector<SftExample> read_sft_dataset(const std::filesystem::path& path);

void write_cot_records(const std::filesystem::path& path,
                       const std::vector<CoTRecord>& records);
std::vector<CoTRecord> read_cot_records(const std::filesystem::path& path);

}  // namespace percot
