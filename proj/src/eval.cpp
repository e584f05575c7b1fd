#include "percot/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace percot {

using nlohmann::json;

double round4(double value) {
  return static_cast<double>(std::llround(value * 10000.0)) / 10000.0;
}

namespace {

std::string fixed4(double value) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << value;
  return os.str();
}

std::string trim_copy(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace

PredictionRecord parse_prediction(const std::string& instance_id, const std::string& raw_output,
                                  std::optional<Label> gold, TargetMode mode) {
  PredictionRecord record;
  record.instance_id = instance_id;
  record.raw_output = raw_output;
  record.gold = gold;

  if (mode == TargetMode::BareLabel) {
    const auto label = parse_label(trim_copy(raw_output));
    if (label)
      record.predicted = *label;
    else
      record.unparseable_reason = "unknown_label";
    return record;
  }

  auto parsed = parse_tagged_output(raw_output);
  if (const auto* err = std::get_if<TagParseError>(&parsed)) {
    record.unparseable_reason = std::string(parse_error_name(err->kind));
  } else {
    const auto& tagged = std::get<TaggedOutput>(parsed);
    record.predicted = tagged.answer_label;
    record.parsed_think = tagged.think_text;
  }
  return record;
}

double accuracy(const std::vector<PredictionRecord>& predictions) {
  if (predictions.empty()) throw DataError("cannot score an empty prediction list");
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    if (!p.gold)
      throw DataError("prediction for instance " + p.instance_id + " has no gold label");
    if (p.predicted && *p.predicted == *p.gold) ++correct;
  }
  return round4(100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size()));
}

double aggregate_seeds(const std::vector<SeedResult>& results) {
  if (results.empty()) throw DataError("cannot aggregate an empty seed list");
  double sum = 0.0;
  for (const auto& r : results) sum += r.accuracy_pct;
  return round4(sum / static_cast<double>(results.size()));
}

double rel_improvement(double accuracy_pct, double baseline_pct) {
  if (baseline_pct <= 0.0) throw DataError("baseline accuracy must be positive");
  return round4(100.0 * (accuracy_pct - baseline_pct) / baseline_pct);
}

EvalReport make_eval_report(const std::string& method, const std::vector<SeedResult>& per_seed,
                            std::size_t total, std::size_t correct, std::size_t unparseable) {
  EvalReport report;
  report.method = method;
  report.per_seed = per_seed;
  report.mean_pct = aggregate_seeds(per_seed);
  report.total = total;
  report.correct = correct;
  report.unparseable = unparseable;
  return report;
}

AblationMatrix ablation_report(const std::map<int, std::vector<SeedResult>>& runs) {
  if (runs.empty()) throw DataError("ablation needs at least one stage");

  AblationMatrix matrix;
  for (const auto& [stage, results] : runs) matrix.stages.push_back(stage);

  const auto& first = runs.begin()->second;
  for (const auto& r : first) matrix.seeds.push_back(r.seed);
  for (const auto& [stage, results] : runs) {
    std::vector<std::uint64_t> seeds;
    for (const auto& r : results) seeds.push_back(r.seed);
    if (seeds != matrix.seeds)
      throw DataError("stage " + std::to_string(stage) +
                      " uses a different seed set than the first stage");
  }

  matrix.cells.assign(matrix.seeds.size(), std::vector<double>(matrix.stages.size(), 0.0));
  std::size_t col = 0;
  for (const auto& [stage, results] : runs) {
    for (std::size_t row = 0; row < results.size(); ++row)
      matrix.cells[row][col] = results[row].accuracy_pct;
    matrix.column_means.push_back(aggregate_seeds(results));
    ++col;
  }
  return matrix;
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "csv") return ReportFormat::Csv;
  return std::nullopt;
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::Markdown) {
    os << "| seed | accuracy |\n|---|---|\n";
    for (const auto& r : report.per_seed)
      os << "| " << r.seed << " | " << fixed4(r.accuracy_pct) << " |\n";
    os << "| 평균 | " << fixed4(report.mean_pct) << " |\n";
  } else {
    os << "seed,accuracy\n";
    for (const auto& r : report.per_seed) os << r.seed << "," << fixed4(r.accuracy_pct) << "\n";
    os << "mean," << fixed4(report.mean_pct) << "\n";
  }
  return os.str();
}

std::string emit_report(const AblationMatrix& matrix, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::Markdown) {
    os << "| seed |";
    for (int stage : matrix.stages) os << " stage" << stage << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < matrix.stages.size(); ++i) os << "---|";
    os << "\n";
    for (std::size_t row = 0; row < matrix.seeds.size(); ++row) {
      os << "| " << matrix.seeds[row] << " |";
      for (double cell : matrix.cells[row]) os << " " << fixed4(cell) << " |";
      os << "\n";
    }
    os << "| 평균 |";
    for (double mean : matrix.column_means) os << " " << fixed4(mean) << " |";
    os << "\n";
  } else {
    os << "seed";
    for (int stage : matrix.stages) os << ",stage" << stage;
    os << "\n";
    for (std::size_t row = 0; row < matrix.seeds.size(); ++row) {
      os << matrix.seeds[row];
      for (double cell : matrix.cells[row]) os << "," << fixed4(cell);
      os << "\n";
    }
    os << "mean";
    for (double mean : matrix.column_means) os << "," << fixed4(mean);
    os << "\n";
  }
  return os.str();
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& predictions) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions file: " + path.string());
  for (const auto& p : predictions) {
    json j{{"instance_id", p.instance_id}, {"raw_output", p.raw_output}};
    if (p.gold) j["gold"] = label_string(*p.gold);
    out << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path,
                                               TargetMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("predictions file not found: " + path.string());
  std::vector<PredictionRecord> predictions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed prediction at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    if (!j.is_object() || !j.contains("instance_id") || !j.contains("raw_output"))
      throw DataError("malformed prediction at line " + std::to_string(line_no) +
                      ": expected {instance_id, raw_output, gold?}");
    std::optional<Label> gold;
    if (j.contains("gold")) {
      gold = parse_label(j.at("gold").get<std::string>());
      if (!gold)
        throw DataError("unknown gold label at line " + std::to_string(line_no) + " of " +
                        path.string());
    }
    predictions.push_back(parse_prediction(j.at("instance_id").get<std::string>(),
                                           j.at("raw_output").get<std::string>(), gold, mode));
  }
  return predictions;
}

std::string eval_report_json(const EvalReport& report) {
  json seeds = json::array();
  for (const auto& r : report.per_seed)
    seeds.push_back({{"seed", r.seed}, {"accuracy_pct", r.accuracy_pct}});
  json j{{"kind", "eval_report"}, {"method", report.method},   {"per_seed", seeds},
         {"mean_pct", report.mean_pct}, {"total", report.total}, {"correct", report.correct},
         {"unparseable", report.unparseable}};
  return j.dump(2);
}

std::string ablation_matrix_json(const AblationMatrix& matrix) {
  json j{{"kind", "ablation_matrix"},
         {"seeds", matrix.seeds},
         {"stages", matrix.stages},
         {"cells", matrix.cells},
         {"column_means", matrix.column_means}};
  return j.dump(2);
}

EvalReport parse_eval_report_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("kind", "") != "eval_report") throw DataError("not an eval report");
  EvalReport report;
  report.method = j.at("method").get<std::string>();
  for (const auto& s : j.at("per_seed"))
    report.per_seed.push_back(
        {s.at("seed").get<std::uint64_t>(), s.at("accuracy_pct").get<double>()});
  report.mean_pct = j.at("mean_pct").get<double>();
  report.total = j.at("total").get<std::size_t>();
  report.correct = j.at("correct").get<std::size_t>();
  report.unparseable = j.at("unparseable").get<std::size_t>();
  return report;
}

AblationMatrix parse_ablation_matrix_json(const std::string& text) {
  json j = json::parse(text);
  if (j.value("kind", "") != "ablation_matrix") throw DataError("not an ablation matrix");
  AblationMatrix matrix;
  matrix.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  matrix.stages = j.at("stages").get<std::vector<int>>();
  matrix.cells = j.at("cells").get<std::vector<std::vector<double>>>();
  matrix.column_means = j.at("column_means").get<std::vector<double>>();
  return matrix;
}

}  // namespace percot
