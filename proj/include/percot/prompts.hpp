#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "percot/corpus.hpp"

namespace percot {

// Bracketed section headers used in rendered prompts.
inline constexpr std::string_view kTeacherDialogHeader = "[전체 대화 내용]";
inline constexpr std::string_view kStudentDialogHeader = "[전체 대화]";
inline constexpr std::string_view kTargetHeader = "[분석 대상 발화]";
inline constexpr std::string_view kGoldMarker = "[이 발화의 정답]";
inline constexpr std::string_view kPerspectivesHeader = "[추론 관점]";
inline constexpr std::string_view kRequirementsHeader = "[요구사항]";

enum class PerspectiveName { Surface, Causal, Impact, Comprehensive };

const std::string& perspective_korean(PerspectiveName name);    // 표면적 ...
std::optional<PerspectiveName> parse_perspective_name(std::string_view korean);

struct Perspective {
  int index = 0;  // 1-based, unique within a set
  PerspectiveName name = PerspectiveName::Surface;
  std::string instruction;

  bool operator==(const Perspective&) const = default;
};

struct PerspectiveSet {
  std::vector<Perspective> perspectives;

  std::size_t size() const { return perspectives.size(); }
  bool empty() const { return perspectives.empty(); }
  bool operator==(const PerspectiveSet&) const = default;
};

// The four built-in reasoning perspectives in canonical order
// (surface, causal, impact, comprehensive).
PerspectiveSet canonical_perspectives();

// First k perspectives in canonical order, indices preserved. k must be in
// [1, set.size()].
PerspectiveSet perspective_prefix(const PerspectiveSet& set, int k);

// Perspective definition file: one JSON record per line
//   {"index": 1, "name": "표면적", "instruction": "..."}
void write_perspective_file(const std::filesystem::path& path, const PerspectiveSet& set);
PerspectiveSet load_perspective_file(const std::filesystem::path& path);

struct TeacherPromptSections {
  std::string full_dialog;
  std::string target_utterance;
  std::string gold_label;
  std::string perspectives;
  std::string requirements;
};

// Answer-conditioned extraction prompt: carries the gold label so the teacher
// explains a known verdict instead of guessing one.
struct TeacherPrompt {
  std::string rendered;
  TeacherPromptSections sections;
};

struct StudentPrompt {
  std::string system;
  std::string user;
};

// Requires a gold label on the instance; throws DataError otherwise.
TeacherPrompt build_teacher_prompt(const AnalysisInstance& instance,
                                   const PerspectiveSet& perspectives);

// Judgment prompt for training/inference. Never contains the gold label.
// An empty perspective set omits the perspective section (used when reasoning
// is distilled without explicit perspectives).
StudentPrompt build_student_prompt(const AnalysisInstance& instance,
                                   const PerspectiveSet& perspectives);

// Variant for the plain supervised baseline: the model answers with the bare
// label, no reasoning block.
StudentPrompt build_student_prompt_bare(const AnalysisInstance& instance);

std::string render_numbered_perspectives(const PerspectiveSet& set);

}  // namespace percot
