#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "percot/cot.hpp"
#include "percot/tinylm.hpp"

namespace percot {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SchedulerKind { CosineWithRestarts };
enum class SelectionMetric { EvalLoss };

struct TrainConfig {
  std::vector<std::uint64_t> seeds = {42, 2025, 7412013};
  int epochs = 5;
  double base_lr = 2e-5;
  int batch_size = 1;
  SchedulerKind scheduler = SchedulerKind::CosineWithRestarts;
  int num_cycles = 0;  // 0 = one cycle per epoch
  SelectionMetric selection = SelectionMetric::EvalLoss;

  int rank = 64;
  double alpha = 64.0;
  double dropout = 0.0;  // no stochastic masking is applied at 0
  std::vector<std::string> target_modules = {"q_proj", "k_proj",  "v_proj",   "o_proj",
                                             "gate_proj", "up_proj", "down_proj"};

  // First-order adaptive optimizer, default moments.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int cycles() const { return num_cycles > 0 ? num_cycles : epochs; }
};

// True exactly on positions [prompt_len, total_len).
std::vector<bool> completion_mask(std::size_t prompt_len, std::size_t total_len);

// Sum of -log softmax(logits.row(t))[targets[t]] over mask-true positions.
// logits: T x V. Throws TrainingError when no position is selected.
double sequence_cross_entropy(const Matrix& logits, std::span<const int> targets,
                              const std::vector<bool>& mask);

struct LossTerm {
  const Matrix* logits = nullptr;
  std::span<const int> targets;
  const std::vector<bool>* mask = nullptr;
};

// Mean over examples of the per-example masked sums.
double cross_entropy(std::span<const LossTerm> batch);

// Cosine-with-restarts schedule over `cycles()` equal cycles: lr starts at
// base_lr, decays to 0 within each cycle, resets at each cycle boundary.
double lr_at(long step, long total_steps, const TrainConfig& config);

// One tokenized example: [BOS] + prompt bytes + target bytes + [EOS].
struct TrainingExample {
  std::vector<int> tokens;
  std::size_t prompt_len = 0;  // tokens before the first target position
};

TrainingExample encode_example(const SftExample& example);
std::string student_input_text(const std::string& system, const std::string& user);

struct StepLogEntry {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochEval {
  int epoch = 0;  // 1-based
  double eval_loss = 0.0;
};

struct TrainResult {
  std::vector<AdapterState> best_adapters;
  double best_eval_loss = 0.0;
  int best_epoch = 0;
  long best_step = 0;
  std::uint64_t seed = 0;
  std::vector<StepLogEntry> step_log;
  std::vector<EpochEval> epoch_evals;
};

// Loss and adapter gradients for a batch (used by the train loop and by
// grad_check).
double batch_loss_and_grads(const TinyTransformer& model,
                            std::span<const TrainingExample> batch,
                            TinyTransformer::AdapterGrads* grads);

// Attaches fresh adapters seeded by `seed`, runs the configured schedule, and
// leaves the model holding the checkpoint with minimum eval loss. Fully
// deterministic for a fixed (model, data, config, seed). Throws TrainingError
// on non-finite loss, with step/lr/batch diagnostics.
TrainResult train(TinyTransformer& model, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& eval_set, const TrainConfig& config,
                  std::uint64_t seed);

// Max relative error between analytic and central-difference gradients over
// every adapter parameter.
double grad_check(TinyTransformer& model, std::span<const TrainingExample> batch,
                  double epsilon);

}  // namespace percot
