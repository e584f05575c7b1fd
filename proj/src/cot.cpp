#include "percot/cot.hpp"

#include <json.hpp>

#include <fstream>

namespace percot {

using nlohmann::json;

namespace {

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";  // U+2026

bool is_space_byte(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space_byte(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space_byte(s.back())) s.remove_suffix(1);
  return s;
}

// Earliest occurrence of `pattern` at a segment boundary (start of text or
// after whitespace), searching from `from`.
std::size_t find_marker(std::string_view text, std::string_view pattern, std::size_t from) {
  std::size_t pos = from;
  while (true) {
    pos = text.find(pattern, pos);
    if (pos == std::string_view::npos) return std::string_view::npos;
    if (pos == 0 || is_space_byte(text[pos - 1])) return pos;
    ++pos;
  }
}

}  // namespace

std::string_view parse_error_name(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::MissingThink: return "missing_think";
    case ParseErrorKind::MissingAnswer: return "missing_answer";
    case ParseErrorKind::UnknownLabel: return "unknown_label";
    case ParseErrorKind::NestedOrDuplicateTags: return "nested_or_duplicate_tags";
  }
  return "unknown";
}

TaggedTarget wrap_training_target(const std::string& think_text, Label label) {
  for (std::string_view reserved : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (think_text.find(reserved) != std::string::npos)
      throw DataError("reasoning text contains reserved substring \"" + std::string(reserved) +
                      "\"");
  }
  TaggedTarget target;
  target.think_text = think_text;
  target.answer_label = label;
  target.rendered.reserve(think_text.size() + 64);
  target.rendered.append(kThinkOpen);
  target.rendered.append(think_text);
  target.rendered.append(kThinkClose);
  target.rendered.append(kAnswerOpen);
  target.rendered.append(label_string(label));
  target.rendered.append(kAnswerClose);
  return target;
}

ParseResult parse_tagged_output(std::string_view text) {
  const auto think_open = text.find(kThinkOpen);
  if (think_open == std::string_view::npos)
    return TagParseError{ParseErrorKind::MissingThink, "no <think> block"};

  const auto body_start = think_open + kThinkOpen.size();
  const auto think_close = text.find(kThinkClose, body_start);
  if (think_close == std::string_view::npos)
    return TagParseError{ParseErrorKind::MissingThink, "<think> is never closed"};

  const std::string_view think_body = text.substr(body_start, think_close - body_start);
  if (think_body.find(kThinkOpen) != std::string_view::npos)
    return TagParseError{ParseErrorKind::NestedOrDuplicateTags, "nested <think>"};

  const auto after_think = think_close + kThinkClose.size();
  const auto answer_open = text.find(kAnswerOpen, after_think);
  if (answer_open == std::string_view::npos)
    return TagParseError{ParseErrorKind::MissingAnswer, "no <answer> block"};

  const std::string_view between = text.substr(after_think, answer_open - after_think);
  if (between.find(kThinkOpen) != std::string_view::npos ||
      between.find(kThinkClose) != std::string_view::npos)
    return TagParseError{ParseErrorKind::NestedOrDuplicateTags,
                         "duplicate think tags before <answer>"};

  const auto answer_start = answer_open + kAnswerOpen.size();
  const auto answer_close = text.find(kAnswerClose, answer_start);
  if (answer_close == std::string_view::npos)
    return TagParseError{ParseErrorKind::MissingAnswer, "<answer> is never closed"};

  const std::string_view answer_body = text.substr(answer_start, answer_close - answer_start);
  if (answer_body.find(kAnswerOpen) != std::string_view::npos)
    return TagParseError{ParseErrorKind::NestedOrDuplicateTags, "nested <answer>"};

  const std::string_view trimmed = trim_view(answer_body);
  const auto label = parse_label(trimmed);
  if (!label) return TagParseError{ParseErrorKind::UnknownLabel, std::string(trimmed)};

  // Anything after </answer> is deliberately ignored.
  return TaggedOutput{std::string(think_body), *label};
}

int count_sentences(std::string_view segment) {
  int count = 0;
  bool in_run = false;
  std::size_t i = 0;
  while (i < segment.size()) {
    bool terminator = false;
    std::size_t advance = 1;
    const char c = segment[i];
    if (c == '.' || c == '!' || c == '?') {
      terminator = true;
    } else if (segment.compare(i, kEllipsis.size(), kEllipsis) == 0) {
      terminator = true;
      advance = kEllipsis.size();
    }
    if (terminator) {
      if (!in_run) ++count;
      in_run = true;
    } else {
      in_run = false;
    }
    i += advance;
  }
  return count;
}

std::vector<std::string> split_perspective_segments(std::string_view think_text, int k,
                                                    bool* all_found) {
  std::vector<std::size_t> starts;   // content start per found marker
  std::vector<std::size_t> at;       // marker position per found marker
  std::size_t from = 0;
  bool complete = true;
  for (int m = 1; m <= k; ++m) {
    const std::string bare = std::to_string(m) + ".";
    const std::string named = "관점 " + bare;
    const auto pos_named = find_marker(think_text, named, from);
    const auto pos_bare = find_marker(think_text, bare, from);
    std::size_t pos = std::min(pos_named, pos_bare);
    if (pos == std::string_view::npos) {
      complete = false;
      break;
    }
    const std::size_t len = (pos == pos_named) ? named.size() : bare.size();
    at.push_back(pos);
    starts.push_back(pos + len);
    from = pos + len;
  }
  if (all_found) *all_found = complete;

  std::vector<std::string> segments;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t end = (i + 1 < at.size()) ? at[i + 1] : think_text.size();
    segments.emplace_back(trim_view(think_text.substr(starts[i], end - starts[i])));
  }
  return segments;
}

ValidationReport validate_cot_record(const CoTRecord& record, int k) {
  ValidationReport report;
  report.label_consistent = record.target.answer_label == record.gold_label;
  if (!report.label_consistent)
    report.issues.push_back("answer label \"" + label_string(record.target.answer_label) +
                            "\" does not match gold label \"" + label_string(record.gold_label) +
                            "\"");

  if (k <= 0) {
    report.perspectives_covered = true;
    report.within_sentence_budget = true;
    return report;
  }

  bool all_found = false;
  const auto segments = split_perspective_segments(record.target.think_text, k, &all_found);
  report.perspectives_covered = all_found;
  if (!all_found)
    report.issues.push_back("reasoning does not cover all " + std::to_string(k) +
                            " numbered perspectives");

  report.within_sentence_budget = true;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const int sentences = count_sentences(segments[i]);
    if (sentences > 2) {
      report.within_sentence_budget = false;
      report.issues.push_back("perspective " + std::to_string(i + 1) + " has " +
                              std::to_string(sentences) + " sentences (budget 2)");
    }
  }
  return report;
}

AssembledDataset assemble_sft_dataset(const std::vector<CoTRecord>& records,
                                      const PerspectiveSet& perspectives,
                                      const AssembleOptions& options) {
  AssembledDataset out;
  out.summary.total = records.size();

  for (const auto& record : records) {
    if (!record.generated()) {
      ++out.summary.dropped_by_reason["generation_failed"];
      continue;
    }
    if (!record.validation.passed() && !options.keep_invalid) {
      std::string reason = "invalid";
      if (!record.validation.label_consistent)
        reason = "label_inconsistent";
      else if (!record.validation.perspectives_covered)
        reason = "perspectives_uncovered";
      else if (!record.validation.within_sentence_budget)
        reason = "sentence_budget_exceeded";
      ++out.summary.dropped_by_reason[reason];
      continue;
    }

    SftExample example;
    if (options.mode == TargetMode::Tagged) {
      const StudentPrompt prompt = build_student_prompt(record.instance, perspectives);
      example.system = prompt.system;
      example.user = prompt.user;
      example.target = record.target.rendered;
    } else {
      const StudentPrompt prompt = build_student_prompt_bare(record.instance);
      example.system = prompt.system;
      example.user = prompt.user;
      example.target = label_string(record.gold_label);
    }
    out.examples.push_back(std::move(example));
    ++out.summary.retained;
  }

  if (out.summary.retained == 0)
    throw DataError("no training examples retained out of " + std::to_string(records.size()) +
                    " records");
  return out;
}

void write_sft_dataset(const std::filesystem::path& path,
                       const std::vector<SftExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  for (const auto& e : examples) {
    json j{{"system", e.system}, {"user", e.user}, {"target", e.target}};
    out << j.dump() << '\n';
  }
}

std::vector<SftExample> read_sft_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("dataset file not found: " + path.string());
  std::vector<SftExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      examples.push_back({j.at("system").get<std::string>(), j.at("user").get<std::string>(),
                          j.at("target").get<std::string>()});
    } catch (const json::exception& e) {
      throw DataError("malformed dataset record at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return examples;
}

namespace {

json instance_to_json(const AnalysisInstance& inst) {
  json j{{"dialogue_id", inst.dialogue_id},
         {"full_dialog", inst.full_dialog},
         {"target_utterance_id", inst.target_utterance_id},
         {"target_text", inst.target_text}};
  if (inst.gold_label) j["gold_label"] = label_string(*inst.gold_label);
  return j;
}

AnalysisInstance instance_from_json(const json& j) {
  AnalysisInstance inst;
  inst.dialogue_id = j.at("dialogue_id").get<std::string>();
  inst.full_dialog = j.at("full_dialog").get<std::string>();
  inst.target_utterance_id = j.at("target_utterance_id").get<std::string>();
  inst.target_text = j.at("target_text").get<std::string>();
  if (j.contains("gold_label")) {
    auto label = parse_label(j.at("gold_label").get<std::string>());
    if (!label) throw DataError("unknown gold label in record");
    inst.gold_label = *label;
  }
  return inst;
}

}  // namespace

void write_cot_records(const std::filesystem::path& path, const std::vector<CoTRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write record file: " + path.string());
  for (const auto& r : records) {
    json j{{"instance", instance_to_json(r.instance)},
           {"gold_label", label_string(r.gold_label)},
           {"prompt_hash", r.prompt_hash},
           {"from_cache", r.from_cache}};
    if (r.generated()) {
      j["teacher_text"] = r.teacher_text;
      j["target"] = r.target.rendered;
      j["validation"] = {{"label_consistent", r.validation.label_consistent},
                         {"perspectives_covered", r.validation.perspectives_covered},
                         {"within_sentence_budget", r.validation.within_sentence_budget},
                         {"issues", r.validation.issues}};
    } else {
      j["error"] = r.generation_error;
    }
    out << j.dump() << '\n';
  }
}

std::vector<CoTRecord> read_cot_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("record file not found: " + path.string());
  std::vector<CoTRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed record at line " + std::to_string(line_no) + ": " + e.what());
    }
    CoTRecord r;
    r.instance = instance_from_json(j.at("instance"));
    auto gold = parse_label(j.at("gold_label").get<std::string>());
    if (!gold) throw DataError("unknown gold label at line " + std::to_string(line_no));
    r.gold_label = *gold;
    r.prompt_hash = j.value("prompt_hash", "");
    r.from_cache = j.value("from_cache", false);
    if (j.contains("error")) {
      r.generation_error = j.at("error").get<std::string>();
    } else {
      r.teacher_text = j.at("teacher_text").get<std::string>();
      const auto rendered = j.at("target").get<std::string>();
      auto parsed = parse_tagged_output(rendered);
      if (const auto* err = std::get_if<TagParseError>(&parsed))
        throw DataError("unparseable target at line " + std::to_string(line_no) + " (" +
                        std::string(parse_error_name(err->kind)) + ")");
      const auto& tagged = std::get<TaggedOutput>(parsed);
      r.target.think_text = tagged.think_text;
      r.target.answer_label = tagged.answer_label;
      r.target.rendered = rendered;
      const auto& v = j.at("validation");
      r.validation.label_consistent = v.at("label_consistent").get<bool>();
      r.validation.perspectives_covered = v.at("perspectives_covered").get<bool>();
      r.validation.within_sentence_budget = v.at("within_sentence_budget").get<bool>();
      r.validation.issues = v.at("issues").get<std::vector<std::string>>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace percot
