#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "percot/cot.hpp"
#include "percot/corpus.hpp"

namespace percot {

// Half-up rounding to 4 decimal places, the precision used in every report.
double round4(double value);

struct PredictionRecord {
  std::string instance_id;
  std::optional<Label> predicted;  // nullopt = unparseable output
  std::string unparseable_reason;
  std::optional<Label> gold;
  std::string raw_output;
  std::string parsed_think;
};

// Interprets a raw model output. Tagged mode goes through the tag parser;
// bare mode trims the output and matches it against the label strings.
PredictionRecord parse_prediction(const std::string& instance_id, const std::string& raw_output,
                                  std::optional<Label> gold, TargetMode mode);

// 100 * correct / total, half-up to 4 decimals. Unparseable predictions count
// as incorrect. Throws DataError on an empty list or a missing gold label.
double accuracy(const std::vector<PredictionRecord>& predictions);

struct SeedResult {
  std::uint64_t seed = 0;
  double accuracy_pct = 0.0;
};

// round4 of the arithmetic mean of per-seed accuracies.
double aggregate_seeds(const std::vector<SeedResult>& results);

// 100 * (a - b) / b at 4 decimals. Throws DataError when b <= 0.
double rel_improvement(double accuracy_pct, double baseline_pct);

struct EvalReport {
  std::string method;
  std::vector<SeedResult> per_seed;
  double mean_pct = 0.0;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;
};

EvalReport make_eval_report(const std::string& method,
                            const std::vector<SeedResult>& per_seed,
                            std::size_t total, std::size_t correct, std::size_t unparseable);

struct AblationMatrix {
  std::vector<std::uint64_t> seeds;          // rows
  std::vector<int> stages;                   // columns
  std::vector<std::vector<double>> cells;    // cells[row][col]
  std::vector<double> column_means;
};

// Throws DataError when the stages do not share one seed set.
AblationMatrix ablation_report(const std::map<int, std::vector<SeedResult>>& runs);

enum class ReportFormat { Markdown, Csv };
std::optional<ReportFormat> parse_report_format(std::string_view name);

std::string emit_report(const EvalReport& report, ReportFormat format);
std::string emit_report(const AblationMatrix& matrix, ReportFormat format);

// Predictions file: line-delimited {"instance_id": ..., "raw_output": ..., "gold": ...?}.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& predictions);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path,
                                               TargetMode mode);

// Report JSON round-trip (consumed by the report subcommand).
std::string eval_report_json(const EvalReport& report);
std::string ablation_matrix_json(const AblationMatrix& matrix);
EvalReport parse_eval_report_json(const std::string& text);
AblationMatrix parse_ablation_matrix_json(const std::string& text);

}  // namespace percot
