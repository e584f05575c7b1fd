#include "percot/prompts.hpp"

#include <json.hpp>

#include <fstream>

namespace percot {

using nlohmann::json;

namespace {

struct BuiltinPerspective {
  PerspectiveName name;
  const char* korean;
  const char* instruction;
};

// The four built-in reasoning perspectives: explicit wording, underlying
// motive, effect on participants and bystanders, holistic context.
const BuiltinPerspective kBuiltins[] = {
    {PerspectiveName::Surface, "표면적",
     "대화에서 사용된 언어 표현 중 부적절한 단어나 표현(욕설, 비속어)이 발견되었는지?"},
    {PerspectiveName::Causal, "원인적",
     "대화가 부적절한 발화의 경우 어떤 원인(차별, 혐오, 편향, 폄하 등)에서 문제가 되는지?"},
    {PerspectiveName::Impact, "영향적",
     "대화의 흐름을 고려했을 때 각 발화자의 발언이 대화 당사자에게는 어떤 영향을 주고, "
     "제3자에게는 어떤 영향을 미치는지?"},
    {PerspectiveName::Comprehensive, "종합적",
     "대화의 전체 맥락과 발화 간의 상호작용을 고려하여 왜 각 발화가 적절 또는 부적절로 "
     "판단되었는지?"},
};

const std::string kStudentSystemBase =
    "전체 대화 맥락을 바탕으로 현재 발화가 '적절'인지 또는 '부적절'인지 판단할 수 있습니다.";

const std::string kStudentSystemTagged =
    " 사고 과정을 <think></think> 태그 안에 작성하고, 최종 판단을 <answer></answer> 태그 "
    "안에 작성하세요.";

const std::string kStudentSystemBare = " 최종 판단만 '적절' 또는 '부적절'로 출력하세요.";

}  // namespace

const std::string& perspective_korean(PerspectiveName name) {
  static const std::string names[] = {"표면적", "원인적", "영향적", "종합적"};
  return names[static_cast<int>(name)];
}

std::optional<PerspectiveName> parse_perspective_name(std::string_view korean) {
  for (const auto& builtin : kBuiltins)
    if (korean == builtin.korean) return builtin.name;
  return std::nullopt;
}

PerspectiveSet canonical_perspectives() {
  PerspectiveSet set;
  int index = 0;
  for (const auto& builtin : kBuiltins)
    set.perspectives.push_back({++index, builtin.name, builtin.instruction});
  return set;
}

PerspectiveSet perspective_prefix(const PerspectiveSet& set, int k) {
  if (k < 1 || k > static_cast<int>(set.size()))
    throw DataError("perspective prefix " + std::to_string(k) + " out of range 1.." +
                    std::to_string(set.size()));
  PerspectiveSet prefix;
  prefix.perspectives.assign(set.perspectives.begin(), set.perspectives.begin() + k);
  return prefix;
}

void write_perspective_file(const std::filesystem::path& path, const PerspectiveSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write perspective file: " + path.string());
  for (const auto& p : set.perspectives) {
    json j{{"index", p.index},
           {"name", perspective_korean(p.name)},
           {"instruction", p.instruction}};
    out << j.dump() << '\n';
  }
}

PerspectiveSet load_perspective_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("perspective file not found: " + path.string());
  PerspectiveSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed perspective record at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    Perspective p;
    p.index = j.at("index").get<int>();
    const auto korean = j.at("name").get<std::string>();
    auto name = parse_perspective_name(korean);
    if (!name)
      throw DataError("unknown perspective name \"" + korean + "\" at line " +
                      std::to_string(line_no));
    p.name = *name;
    p.instruction = j.at("instruction").get<std::string>();
    if (p.instruction.empty())
      throw DataError("empty perspective instruction at line " + std::to_string(line_no));
    set.perspectives.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < set.perspectives.size(); ++i)
    if (set.perspectives[i].index != static_cast<int>(i) + 1)
      throw DataError("perspective indices must be consecutive from 1 in " + path.string());
  return set;
}

std::string render_numbered_perspectives(const PerspectiveSet& set) {
  std::string out;
  for (const auto& p : set.perspectives) {
    if (!out.empty()) out += '\n';
    out += std::to_string(p.index);
    out += ". <";
    out += perspective_korean(p.name);
    out += " 관점> ";
    out += p.instruction;
  }
  return out;
}

TeacherPrompt build_teacher_prompt(const AnalysisInstance& instance,
                                   const PerspectiveSet& perspectives) {
  if (!instance.gold_label)
    throw DataError("teacher prompt needs a gold label (instance " +
                    instance.target_utterance_id + ")");

  TeacherPrompt prompt;
  auto& s = prompt.sections;
  s.full_dialog = instance.full_dialog;
  s.target_utterance = instance.target_utterance_id + ": " + instance.target_text;
  s.gold_label = label_string(*instance.gold_label);
  s.perspectives = render_numbered_perspectives(perspectives);

  s.requirements = "1. 분석 대상 발화는 " + s.gold_label +
                   "입니다. 발화의 판단 근거를 제시된 추론 관점에 따라 순서대로 작성하세요.\n"
                   "2. 각 관점마다 2문장 이내로 간결하고 핵심적인 추론 과정을 작성하세요.\n"
                   "3. 각 관점의 추론은 해당 번호(\"1.\", \"2.\", ...)로 시작하세요.";

  std::string r;
  r += kTeacherDialogHeader;
  r += '\n';
  r += s.full_dialog;
  r += "\n\n";
  r += kTargetHeader;
  r += '\n';
  r += s.target_utterance;
  r += "\n\n";
  r += kGoldMarker;
  r += ' ';
  r += s.gold_label;
  if (!perspectives.empty()) {
    r += "\n\n";
    r += kPerspectivesHeader;
    r += '\n';
    r += s.perspectives;
  }
  r += "\n\n";
  r += kRequirementsHeader;
  r += '\n';
  r += s.requirements;
  prompt.rendered = std::move(r);
  return prompt;
}

StudentPrompt build_student_prompt(const AnalysisInstance& instance,
                                   const PerspectiveSet& perspectives) {
  StudentPrompt prompt;
  prompt.system = kStudentSystemBase + kStudentSystemTagged;

  std::string u;
  u += kStudentDialogHeader;
  u += '\n';
  u += instance.full_dialog;
  u += "\n\n";
  u += kTargetHeader;
  u += '\n';
  u += instance.target_utterance_id + ": " + instance.target_text;
  if (!perspectives.empty()) {
    u += "\n\n";
    u += kPerspectivesHeader;
    u += '\n';
    u += render_numbered_perspectives(perspectives);
  }
  prompt.user = std::move(u);
  return prompt;
}

StudentPrompt build_student_prompt_bare(const AnalysisInstance& instance) {
  StudentPrompt prompt = build_student_prompt(instance, PerspectiveSet{});
  prompt.system = kStudentSystemBase + kStudentSystemBare;
  return prompt;
}

}  // namespace percot
