#include "percot/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace percot {

std::vector<bool> completion_mask(std::size_t prompt_len, std::size_t total_len) {
  if (prompt_len > total_len)
    throw TrainingError("prompt length " + std::to_string(prompt_len) +
                        " exceeds total length " + std::to_string(total_len));
  std::vector<bool> mask(total_len, false);
  for (std::size_t i = prompt_len; i < total_len; ++i) mask[i] = true;
  return mask;
}

namespace {

double log_softmax_at(const Eigen::Ref<const Eigen::RowVectorXd>& row, int index) {
  const double peak = row.maxCoeff();
  const double lse = std::log((row.array() - peak).exp().sum());
  return row(index) - peak - lse;
}

}  // namespace

double sequence_cross_entropy(const Matrix& logits, std::span<const int> targets,
                              const std::vector<bool>& mask) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size() || targets.size() != mask.size())
    throw TrainingError("logits, targets and mask must agree in length");
  double loss = 0.0;
  bool any = false;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (!mask[t]) continue;
    any = true;
    if (targets[t] < 0 || targets[t] >= logits.cols())
      throw TrainingError("target id out of vocabulary at position " + std::to_string(t));
    loss -= log_softmax_at(logits.row(static_cast<Eigen::Index>(t)), targets[t]);
  }
  if (!any) throw TrainingError("example selects no target positions");
  return loss;
}

double cross_entropy(std::span<const LossTerm> batch) {
  if (batch.empty()) throw TrainingError("empty batch");
  double total = 0.0;
  for (const auto& term : batch)
    total += sequence_cross_entropy(*term.logits, term.targets, *term.mask);
  return total / static_cast<double>(batch.size());
}

double lr_at(long step, long total_steps, const TrainConfig& config) {
  if (total_steps <= 0) throw TrainingError("total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw TrainingError("step " + std::to_string(step) + " outside [0, " +
                        std::to_string(total_steps) + "]");
  const double position = static_cast<double>(step) * config.cycles() /
                          static_cast<double>(total_steps);
  const double progress = position - std::floor(position);
  return config.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

std::string student_input_text(const std::string& system, const std::string& user) {
  return system + "\n\n" + user + "\n\n";
}

TrainingExample encode_example(const SftExample& example) {
  TrainingExample out;
  const std::string input = student_input_text(example.system, example.user);
  out.tokens.push_back(kBosId);
  for (int t : tokenize(input)) out.tokens.push_back(t);
  out.prompt_len = out.tokens.size();
  for (int t : tokenize(example.target)) out.tokens.push_back(t);
  out.tokens.push_back(kEosId);
  return out;
}

namespace {

struct ShiftedExample {
  std::span<const int> inputs;    // tokens[0 .. L-2]
  std::vector<int> targets;       // tokens[1 .. L-1]
  std::vector<bool> target_mask;  // completion mask shifted onto predictions
};

ShiftedExample shift(const TrainingExample& example) {
  const std::size_t len = example.tokens.size();
  if (len < 2 || example.prompt_len >= len)
    throw TrainingError("example has no target tokens");
  ShiftedExample out;
  out.inputs = std::span<const int>(example.tokens.data(), len - 1);
  out.targets.assign(example.tokens.begin() + 1, example.tokens.end());
  const auto mask = completion_mask(example.prompt_len, len);
  out.target_mask.assign(mask.begin() + 1, mask.end());
  return out;
}

}  // namespace

double batch_loss_and_grads(const TinyTransformer& model, std::span<const TrainingExample> batch,
                            TinyTransformer::AdapterGrads* grads) {
  if (batch.empty()) throw TrainingError("empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& example : batch) {
    const ShiftedExample ex = shift(example);
    TinyTransformer::Activations cache;
    const Matrix logits = model.forward(ex.inputs, &cache);
    total += sequence_cross_entropy(logits, ex.targets, ex.target_mask);
    if (!grads) continue;

    Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      if (!ex.target_mask[static_cast<std::size_t>(t)]) continue;
      const auto row = logits.row(t);
      const double peak = row.maxCoeff();
      Eigen::RowVectorXd probs = (row.array() - peak).exp();
      probs /= probs.sum();
      dlogits.row(t) = probs * inv_n;
      dlogits(t, ex.targets[static_cast<std::size_t>(t)]) -= inv_n;
    }
    model.backward(cache, dlogits, *grads);
  }
  return total * inv_n;
}

namespace {

// Deterministic Fisher-Yates; std::shuffle's ordering is not pinned by the
// standard.
void shuffle_indices(std::vector<std::size_t>& indices, detail::GaussianRng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i)
    std::swap(indices[i - 1], indices[rng.next() % i]);
}

struct AdamState {
  std::vector<Matrix> m_a, v_a, m_b, v_b;
  long t = 0;
};

void adam_step(TinyTransformer& model, const TinyTransformer::AdapterGrads& grads,
               AdamState& state, const TrainConfig& config, double lr) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.t));
  std::size_t slot = 0;
  for (int layer = 0; layer < model.config().n_layers; ++layer) {
    for (auto name : kSiteNames) {
      LinearSite& site = model.site(layer, name);
      if (!site.adapter) continue;
      auto update = [&](Matrix& param, const Matrix& grad, Matrix& m, Matrix& v) {
        m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
        v = config.adam_beta2 * v.array().matrix() +
            (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
        const Matrix m_hat = m / bc1;
        const Matrix v_hat = v / bc2;
        param -= lr * m_hat.cwiseQuotient(
                          (v_hat.cwiseSqrt().array() + config.adam_eps).matrix());
      };
      update(site.adapter->a, grads.da[slot], state.m_a[slot], state.v_a[slot]);
      update(site.adapter->b, grads.db[slot], state.m_b[slot], state.v_b[slot]);
      ++slot;
    }
  }
}

double evaluate_loss(const TinyTransformer& model, const std::vector<TrainingExample>& eval_set) {
  double total = 0.0;
  for (const auto& example : eval_set) {
    const ShiftedExample ex = shift(example);
    const Matrix logits = model.forward(ex.inputs);
    total += sequence_cross_entropy(logits, ex.targets, ex.target_mask);
  }
  return total / static_cast<double>(eval_set.size());
}

}  // namespace

TrainResult train(TinyTransformer& model, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& eval_set, const TrainConfig& config,
                  std::uint64_t seed) {
  if (train_set.empty() || eval_set.empty())
    throw TrainingError("train and eval datasets must be non-empty");
  if (config.epochs < 1 || config.base_lr <= 0.0 || config.batch_size < 1)
    throw TrainingError("bad training configuration");
  if (!model.adapted_site_labels().empty())
    throw TrainingError("model already carries adapters");

  attach_adapters(model, config.target_modules, config.rank, config.alpha, seed);

  const long steps_per_epoch =
      static_cast<long>((train_set.size() + config.batch_size - 1) / config.batch_size);
  const long total_steps = steps_per_epoch * config.epochs;

  AdamState adam;
  {
    const auto zero = model.zero_adapter_grads();
    adam.m_a = zero.da;
    adam.v_a = zero.da;
    adam.m_b = zero.db;
    adam.v_b = zero.db;
  }

  TrainResult result;
  result.seed = seed;

  detail::GaussianRng order_rng(seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> indices(train_set.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  long global_step = 0;
  bool have_best = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_indices(indices, order_rng);
    for (std::size_t begin = 0; begin < indices.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(indices.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<TrainingExample> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train_set[indices[i]]);

      auto grads = model.zero_adapter_grads();
      const double loss = batch_loss_and_grads(model, batch, &grads);
      const double lr = lr_at(global_step, total_steps, config);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at step " + std::to_string(global_step) +
                            " (lr " + std::to_string(lr) + ", batch starting at index " +
                            std::to_string(indices[begin]) + ")");
      adam_step(model, grads, adam, config, lr);
      result.step_log.push_back({global_step, lr, loss});
      ++global_step;
    }

    const double eval_loss = evaluate_loss(model, eval_set);
    if (!std::isfinite(eval_loss))
      throw TrainingError("non-finite eval loss after epoch " + std::to_string(epoch));
    result.epoch_evals.push_back({epoch, eval_loss});
    if (!have_best || eval_loss < result.best_eval_loss) {
      have_best = true;
      result.best_eval_loss = eval_loss;
      result.best_epoch = epoch;
      result.best_step = global_step;
      result.best_adapters = model.adapter_states();
    }
  }

  model.set_adapter_states(result.best_adapters);
  return result;
}

double grad_check(TinyTransformer& model, std::span<const TrainingExample> batch,
                  double epsilon) {
  auto grads = model.zero_adapter_grads();
  if (grads.da.empty()) throw TrainingError("model has no adapters to check");
  batch_loss_and_grads(model, batch, &grads);

  double max_rel = 0.0;
  std::size_t slot = 0;
  for (int layer = 0; layer < model.config().n_layers; ++layer) {
    for (auto name : kSiteNames) {
      LinearSite& site = model.site(layer, name);
      if (!site.adapter) continue;
      auto check_param = [&](Matrix& param, const Matrix& analytic) {
        for (Eigen::Index r = 0; r < param.rows(); ++r) {
          for (Eigen::Index c = 0; c < param.cols(); ++c) {
            const double saved = param(r, c);
            param(r, c) = saved + epsilon;
            const double plus = batch_loss_and_grads(model, batch, nullptr);
            param(r, c) = saved - epsilon;
            const double minus = batch_loss_and_grads(model, batch, nullptr);
            param(r, c) = saved;
            const double numeric = (plus - minus) / (2.0 * epsilon);
            const double a = analytic(r, c);
            // Absolute floor keeps near-zero gradient pairs from exploding
            // the ratio.
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
          }
        }
      };
      check_param(site.adapter->a, grads.da[slot]);
      check_param(site.adapter->b, grads.db[slot]);
      ++slot;
    }
  }
  return max_rel;
}

}  // namespace percot
