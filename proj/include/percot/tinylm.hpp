#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "percot/lora.hpp"

namespace percot {

// Byte-level vocabulary: ids 0..255 are raw bytes, specials follow.
inline constexpr int kByteTokens = 256;
inline constexpr int kBosId = 256;
inline constexpr int kEosId = 257;
inline constexpr int kPadId = 258;
inline constexpr int kMinVocab = 259;

std::vector<int> tokenize(std::string_view text);
std::string detokenize(std::span<const int> tokens);  // special ids are skipped

inline constexpr std::array<std::string_view, 7> kSiteNames = {
    "q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj"};

struct ModelConfig {
  int vocab_size = 260;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int max_seq_len = 512;
  double init_std = 0.08;
  double head_init_std = 0.40;
  double norm_eps = 1e-6;

  void validate() const;  // throws ModelError
};

// Decoder-only transformer at desk scale: RMSNorm, causal multi-head
// attention (q/k/v/o), gated feed-forward (gate/up/down), untied output head.
// All arithmetic in double precision.
class TinyTransformer {
 public:
  TinyTransformer(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t init_seed() const { return init_seed_; }

  // Addressing by (layer, site name); throws ModelError on unknown names.
  LinearSite& site(int layer, std::string_view name);
  const LinearSite& site(int layer, std::string_view name) const;

  // "layer_<i>.<site>" for every (layer, site) pair, layer-major, canonical
  // site order.
  std::vector<std::string> site_labels() const;

  // Ordered list of sites carrying adapters; gradient buffers align with it.
  std::vector<std::string> adapted_site_labels() const;

  // Cached per-layer activations from a forward pass, consumed by backward().
  struct Activations {
    std::vector<int> tokens;
    Matrix input;  // d_model x T, embedding + positional encoding
    struct Layer {
      Matrix norm1_in, norm1_out;
      Matrix q, k, v;                    // d_model x T
      std::vector<Matrix> attn_weights;  // per head, T x T lower-triangular
      Matrix attn_concat;                // d_model x T
      Matrix norm2_in, norm2_out;
      Matrix gate, up, ffn_act;  // d_ff x T
    };
    std::vector<Layer> layers;
    Matrix final_norm_in, final_norm_out;
  };

  // Logits, one row per position (seq_len x vocab_size).
  Matrix forward(std::span<const int> tokens) const;
  Matrix forward(std::span<const int> tokens, Activations* cache) const;

  // Gradient buffers for every adapted site, in adapted_site_labels() order.
  struct AdapterGrads {
    std::vector<Matrix> da;
    std::vector<Matrix> db;
  };
  AdapterGrads zero_adapter_grads() const;

  // Accumulates d(loss)/d(A,B) for every adapter given d(loss)/d(logits)
  // (same shape as forward output). Base weights receive no gradient.
  void backward(const Activations& cache, const Matrix& dlogits, AdapterGrads& grads) const;

  // Snapshot / restore of adapter state, aligned with adapted_site_labels().
  std::vector<AdapterState> adapter_states() const;
  void set_adapter_states(const std::vector<AdapterState>& states);
  void detach_adapters();

  // Full checkpoint: config + every named parameter tensor.
  void save(const std::filesystem::path& path) const;
  static TinyTransformer load(const std::filesystem::path& path);

  // Folds every adapter into its base weight and drops the adapters.
  void merge_all_adapters();

  const Matrix& embedding() const { return embedding_; }
  const Matrix& lm_head() const { return lm_head_; }

 private:
  friend std::size_t attach_adapters(TinyTransformer&, const std::vector<std::string>&, int,
                                     double, std::uint64_t);

  struct LayerParams {
    LinearSite q, k, v, o;
    LinearSite gate, up, down;
    Vector norm1_gain, norm2_gain;
  };

  Matrix embed(std::span<const int> tokens) const;

  ModelConfig config_;
  std::uint64_t init_seed_ = 0;
  Matrix embedding_;  // d_model x vocab
  std::vector<LayerParams> layers_;
  Vector final_norm_gain_;
  Matrix lm_head_;  // vocab x d_model

  TinyTransformer() = default;
};

// Deterministic argmax decoding. Decodes until `stop` has been emitted (the
// output then ends exactly at its last byte), an end-of-sequence token is
// produced, or max_new tokens were generated. Returns the continuation text.
std::string greedy_decode(const TinyTransformer& model, std::span<const int> prompt_tokens,
                          int max_new, std::string_view stop);

// Core decode loop shared with greedy_decode; next_token receives the full
// token sequence so far.
std::string decode_loop(std::span<const int> prompt_tokens, int max_new, std::string_view stop,
                        const std::function<int(std::span<const int>)>& next_token);

}  // namespace percot
