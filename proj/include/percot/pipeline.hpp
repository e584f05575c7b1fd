#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "percot/corpus.hpp"
#include "percot/cot.hpp"
#include "percot/eval.hpp"
#include "percot/teacher.hpp"
#include "percot/tinylm.hpp"
#include "percot/trainer.hpp"

namespace percot {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

enum class Method { Sft, SftCot, Proposed };

const std::string& method_name(Method method);
std::optional<Method> parse_method(std::string_view name);

struct PipelineConfig {
  std::map<Split, std::filesystem::path> corpus_paths;
  std::optional<std::filesystem::path> perspective_file;  // default: built-in set
  int stages = 4;
  Method method = Method::Proposed;
  TeacherConfig teacher;
  ModelConfig model;
  std::uint64_t model_init_seed = 1;
  TrainConfig train;
  std::filesystem::path output_dir = "out";
  int decode_max_new = 256;

  static PipelineConfig from_file(const std::filesystem::path& path);
  static PipelineConfig from_json_text(const std::string& text,
                                       const std::filesystem::path& base_dir);
};

// Effective perspective set for a config: prefix of the configured (or
// built-in) set for the proposed method, empty otherwise.
PerspectiveSet effective_perspectives(const PipelineConfig& config);

// Digest over everything that shapes training/evaluation semantics: stages,
// method, model config, train config and the perspective instructions.
// Embedded in artifacts; downstream commands verify it.
std::string config_digest(const PipelineConfig& config);

std::filesystem::path instances_path(const PipelineConfig& config, Split split);
std::filesystem::path records_path(const PipelineConfig& config);
std::filesystem::path checkpoint_path(const PipelineConfig& config, std::uint64_t seed);

struct CommandIO {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

int cmd_transform(const PipelineConfig& config, const CommandIO& io);
int cmd_gen_cot(const PipelineConfig& config, bool mock_teacher, bool keep_invalid,
                const CommandIO& io);
int cmd_validate(const PipelineConfig& config, const std::filesystem::path& records_file,
                 const CommandIO& io);
int cmd_train(const PipelineConfig& config, bool keep_invalid, const CommandIO& io);
int cmd_infer(const PipelineConfig& config, const std::filesystem::path& checkpoint_file,
              const std::filesystem::path& instances_file,
              const std::filesystem::path& predictions_out, const CommandIO& io);
int cmd_evaluate(const PipelineConfig& config,
                 const std::map<std::uint64_t, std::filesystem::path>& injected_predictions,
                 const CommandIO& io);
int cmd_ablate(const PipelineConfig& config, bool mock_teacher,
               const std::map<std::pair<int, std::uint64_t>, std::filesystem::path>&
                   injected_predictions,
               const CommandIO& io);
int cmd_report(const std::filesystem::path& report_json, ReportFormat format,
               const std::optional<std::filesystem::path>& out_path, const CommandIO& io);

}  // namespace percot
