#include "percot/tinylm.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

#include "rng.hpp"

namespace percot {

using nlohmann::json;

std::vector<int> tokenize(std::string_view text) {
  std::vector<int> tokens;
  tokens.reserve(text.size());
  for (unsigned char byte : text) tokens.push_back(static_cast<int>(byte));
  return tokens;
}

std::string detokenize(std::span<const int> tokens) {
  std::string text;
  text.reserve(tokens.size());
  for (int token : tokens)
    if (token >= 0 && token < kByteTokens) text.push_back(static_cast<char>(token));
  return text;
}

void ModelConfig::validate() const {
  if (vocab_size < kMinVocab)
    throw ModelError("vocab_size must be at least " + std::to_string(kMinVocab));
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_seq_len <= 0)
    throw ModelError("model dimensions must be positive");
  if (d_model % n_heads != 0) throw ModelError("d_model must be divisible by n_heads");
}

namespace {

Matrix gaussian_matrix(int rows, int cols, double stddev, detail::GaussianRng& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(stddev);
  return m;
}

Vector positional_encoding(int position, int d_model) {
  Vector pe(d_model);
  for (int i = 0; i < d_model; i += 2) {
    const double denom = std::pow(10000.0, static_cast<double>(i) / d_model);
    pe(i) = std::sin(position / denom);
    if (i + 1 < d_model) pe(i + 1) = std::cos(position / denom);
  }
  return pe;
}

// y = (x / rms(x)) .* gain, column-wise.
Matrix rmsnorm(const Matrix& x, const Vector& gain, double eps) {
  Matrix y(x.rows(), x.cols());
  const double d = static_cast<double>(x.rows());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const double r = std::sqrt(x.col(t).squaredNorm() / d + eps);
    y.col(t) = (x.col(t) / r).cwiseProduct(gain);
  }
  return y;
}

Matrix rmsnorm_backward(const Matrix& x, const Vector& gain, const Matrix& dy, double eps) {
  Matrix dx(x.rows(), x.cols());
  const double d = static_cast<double>(x.rows());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const double r = std::sqrt(x.col(t).squaredNorm() / d + eps);
    const Vector n = x.col(t) / r;
    const Vector dn = dy.col(t).cwiseProduct(gain);
    dx.col(t) = (dn - n * (n.dot(dn) / d)) / r;
  }
  return dx;
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

double silu_grad(double v) {
  const double s = 1.0 / (1.0 + std::exp(-v));
  return s * (1.0 + v * (1.0 - s));
}

}  // namespace

TinyTransformer::TinyTransformer(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), init_seed_(init_seed) {
  config_.validate();
  detail::GaussianRng rng(init_seed);
  const int d = config_.d_model;
  embedding_ = gaussian_matrix(d, config_.vocab_size, config_.init_std, rng);
  layers_.resize(config_.n_layers);
  for (auto& layer : layers_) {
    layer.q.weight = gaussian_matrix(d, d, config_.init_std, rng);
    layer.k.weight = gaussian_matrix(d, d, config_.init_std, rng);
    layer.v.weight = gaussian_matrix(d, d, config_.init_std, rng);
    layer.o.weight = gaussian_matrix(d, d, config_.init_std, rng);
    layer.gate.weight = gaussian_matrix(config_.d_ff, d, config_.init_std, rng);
    layer.up.weight = gaussian_matrix(config_.d_ff, d, config_.init_std, rng);
    layer.down.weight = gaussian_matrix(d, config_.d_ff, config_.init_std, rng);
    layer.norm1_gain = Vector::Ones(d);
    layer.norm2_gain = Vector::Ones(d);
  }
  final_norm_gain_ = Vector::Ones(d);
  lm_head_ = gaussian_matrix(config_.vocab_size, d, config_.head_init_std, rng);
}

LinearSite& TinyTransformer::site(int layer, std::string_view name) {
  return const_cast<LinearSite&>(std::as_const(*this).site(layer, name));
}

const LinearSite& TinyTransformer::site(int layer, std::string_view name) const {
  if (layer < 0 || layer >= config_.n_layers)
    throw ModelError("layer index " + std::to_string(layer) + " out of range");
  const LayerParams& p = layers_[layer];
  if (name == "q_proj") return p.q;
  if (name == "k_proj") return p.k;
  if (name == "v_proj") return p.v;
  if (name == "o_proj") return p.o;
  if (name == "gate_proj") return p.gate;
  if (name == "up_proj") return p.up;
  if (name == "down_proj") return p.down;
  throw ModelError("unknown site name: " + std::string(name));
}

std::vector<std::string> TinyTransformer::site_labels() const {
  std::vector<std::string> labels;
  for (int layer = 0; layer < config_.n_layers; ++layer)
    for (auto name : kSiteNames)
      labels.push_back("layer_" + std::to_string(layer) + "." + std::string(name));
  return labels;
}

std::vector<std::string> TinyTransformer::adapted_site_labels() const {
  std::vector<std::string> labels;
  for (int layer = 0; layer < config_.n_layers; ++layer)
    for (auto name : kSiteNames)
      if (site(layer, name).adapter)
        labels.push_back("layer_" + std::to_string(layer) + "." + std::string(name));
  return labels;
}

Matrix TinyTransformer::embed(std::span<const int> tokens) const {
  Matrix x(config_.d_model, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int token = tokens[t];
    if (token < 0 || token >= config_.vocab_size)
      throw ModelError("token id " + std::to_string(token) + " outside vocabulary");
    x.col(static_cast<Eigen::Index>(t)) =
        embedding_.col(token) + positional_encoding(static_cast<int>(t), config_.d_model);
  }
  return x;
}

Matrix TinyTransformer::forward(std::span<const int> tokens) const {
  return forward(tokens, nullptr);
}

Matrix TinyTransformer::forward(std::span<const int> tokens, Activations* cache) const {
  if (tokens.empty()) throw ModelError("cannot run forward on an empty sequence");
  if (static_cast<int>(tokens.size()) > config_.max_seq_len)
    throw ModelError("sequence length " + std::to_string(tokens.size()) +
                     " exceeds max_seq_len " + std::to_string(config_.max_seq_len));

  const int T = static_cast<int>(tokens.size());
  const int heads = config_.n_heads;
  const int head_dim = config_.d_model / heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Activations local;
  Activations& act = cache ? *cache : local;
  act.tokens.assign(tokens.begin(), tokens.end());
  act.layers.clear();
  act.layers.resize(layers_.size());

  Matrix x = embed(tokens);
  act.input = x;

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerParams& p = layers_[l];
    auto& lcache = act.layers[l];

    lcache.norm1_in = x;
    lcache.norm1_out = rmsnorm(x, p.norm1_gain, config_.norm_eps);
    lcache.q = lora_forward(lcache.norm1_out, p.q);
    lcache.k = lora_forward(lcache.norm1_out, p.k);
    lcache.v = lora_forward(lcache.norm1_out, p.v);

    lcache.attn_concat.resize(config_.d_model, T);
    lcache.attn_weights.assign(heads, Matrix::Zero(T, T));
    for (int h = 0; h < heads; ++h) {
      const auto qh = lcache.q.middleRows(h * head_dim, head_dim);
      const auto kh = lcache.k.middleRows(h * head_dim, head_dim);
      const auto vh = lcache.v.middleRows(h * head_dim, head_dim);
      Matrix& weights = lcache.attn_weights[h];
      // Query positions attend to their prefix only; later columns are never
      // read, which keeps earlier outputs bit-identical under suffix edits.
      for (int t = 0; t < T; ++t) {
        Vector scores = kh.leftCols(t + 1).transpose() * qh.col(t) * inv_sqrt_hd;
        const double peak = scores.maxCoeff();
        Vector w = (scores.array() - peak).exp();
        w /= w.sum();
        weights.row(t).head(t + 1) = w.transpose();
        lcache.attn_concat.col(t).segment(h * head_dim, head_dim) = vh.leftCols(t + 1) * w;
      }
    }

    x = lcache.norm1_in + lora_forward(lcache.attn_concat, p.o);

    lcache.norm2_in = x;
    lcache.norm2_out = rmsnorm(x, p.norm2_gain, config_.norm_eps);
    lcache.gate = lora_forward(lcache.norm2_out, p.gate);
    lcache.up = lora_forward(lcache.norm2_out, p.up);
    lcache.ffn_act = lcache.gate.unaryExpr([](double v) { return silu(v); })
                         .cwiseProduct(lcache.up);
    x = lcache.norm2_in + lora_forward(lcache.ffn_act, p.down);
  }

  act.final_norm_in = x;
  act.final_norm_out = rmsnorm(x, final_norm_gain_, config_.norm_eps);
  Matrix logits = (lm_head_ * act.final_norm_out).transpose();  // T x vocab
  return logits;
}

TinyTransformer::AdapterGrads TinyTransformer::zero_adapter_grads() const {
  AdapterGrads grads;
  for (int layer = 0; layer < config_.n_layers; ++layer) {
    for (auto name : kSiteNames) {
      const LinearSite& s = site(layer, name);
      if (!s.adapter) continue;
      grads.da.push_back(Matrix::Zero(s.adapter->a.rows(), s.adapter->a.cols()));
      grads.db.push_back(Matrix::Zero(s.adapter->b.rows(), s.adapter->b.cols()));
    }
  }
  return grads;
}

namespace {

// dInput for one site; accumulates adapter gradients when the site is adapted.
Matrix site_backward(const LinearSite& site, const Matrix& input, const Matrix& dout,
                     TinyTransformer::AdapterGrads* grads, int slot) {
  Matrix dinput = site.weight.transpose() * dout;
  if (site.adapter) {
    const LoraAdapter& ad = *site.adapter;
    const double s = ad.scale();
    const Matrix bt_dout = ad.b.transpose() * dout;  // r x T
    dinput.noalias() += s * (ad.a.transpose() * bt_dout);
    if (grads && slot >= 0) {
      grads->db[slot].noalias() += s * (dout * (ad.a * input).transpose());
      grads->da[slot].noalias() += s * (bt_dout * input.transpose());
    }
  }
  return dinput;
}

}  // namespace

void TinyTransformer::backward(const Activations& act, const Matrix& dlogits,
                               AdapterGrads& grads) const {
  const int T = static_cast<int>(act.tokens.size());
  const int heads = config_.n_heads;
  const int head_dim = config_.d_model / heads;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(head_dim));

  // Gradient slot per (layer, site), matching adapted_site_labels() order.
  std::vector<std::array<int, 7>> slots(layers_.size());
  int next_slot = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    for (std::size_t s = 0; s < kSiteNames.size(); ++s)
      slots[l][s] = site(static_cast<int>(l), kSiteNames[s]).adapter ? next_slot++ : -1;

  Matrix dz = lm_head_.transpose() * dlogits.transpose();  // d x T
  Matrix dx = rmsnorm_backward(act.final_norm_in, final_norm_gain_, dz, config_.norm_eps);

  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerParams& p = layers_[l];
    const auto& lcache = act.layers[l];

    // feed-forward block
    Matrix dffn = site_backward(p.down, lcache.ffn_act, dx, &grads, slots[l][6]);
    Matrix dgate(dffn.rows(), dffn.cols());
    Matrix dup(dffn.rows(), dffn.cols());
    for (Eigen::Index c = 0; c < dffn.cols(); ++c) {
      for (Eigen::Index r = 0; r < dffn.rows(); ++r) {
        const double g = lcache.gate(r, c);
        dgate(r, c) = dffn(r, c) * lcache.up(r, c) * silu_grad(g);
        dup(r, c) = dffn(r, c) * silu(g);
      }
    }
    Matrix dnorm2 = site_backward(p.gate, lcache.norm2_out, dgate, &grads, slots[l][4]);
    dnorm2 += site_backward(p.up, lcache.norm2_out, dup, &grads, slots[l][5]);
    dx += rmsnorm_backward(lcache.norm2_in, p.norm2_gain, dnorm2, config_.norm_eps);

    // attention block
    Matrix du = site_backward(p.o, lcache.attn_concat, dx, &grads, slots[l][3]);
    Matrix dq = Matrix::Zero(config_.d_model, T);
    Matrix dk = Matrix::Zero(config_.d_model, T);
    Matrix dv = Matrix::Zero(config_.d_model, T);
    for (int h = 0; h < heads; ++h) {
      const auto qh = lcache.q.middleRows(h * head_dim, head_dim);
      const auto kh = lcache.k.middleRows(h * head_dim, head_dim);
      const auto vh = lcache.v.middleRows(h * head_dim, head_dim);
      const auto duh = du.middleRows(h * head_dim, head_dim);
      const Matrix& weights = lcache.attn_weights[h];
      auto dvh = dv.middleRows(h * head_dim, head_dim);
      auto dqh = dq.middleRows(h * head_dim, head_dim);
      auto dkh = dk.middleRows(h * head_dim, head_dim);
      for (int t = 0; t < T; ++t) {
        const auto w = weights.row(t).head(t + 1).transpose();
        dvh.leftCols(t + 1).noalias() += duh.col(t) * w.transpose();
        Vector dw = vh.leftCols(t + 1).transpose() * duh.col(t);
        const double inner = w.dot(dw);
        Vector ds = w.cwiseProduct(dw.array().matrix() -
                                   Vector::Constant(t + 1, inner));
        dqh.col(t).noalias() = kh.leftCols(t + 1) * ds * inv_sqrt_hd;
        dkh.leftCols(t + 1).noalias() += (qh.col(t) * inv_sqrt_hd) * ds.transpose();
      }
    }
    Matrix dnorm1 = site_backward(p.q, lcache.norm1_out, dq, &grads, slots[l][0]);
    dnorm1 += site_backward(p.k, lcache.norm1_out, dk, &grads, slots[l][1]);
    dnorm1 += site_backward(p.v, lcache.norm1_out, dv, &grads, slots[l][2]);
    dx += rmsnorm_backward(lcache.norm1_in, p.norm1_gain, dnorm1, config_.norm_eps);
  }
}

std::vector<AdapterState> TinyTransformer::adapter_states() const {
  std::vector<AdapterState> states;
  for (int layer = 0; layer < config_.n_layers; ++layer) {
    for (auto name : kSiteNames) {
      const LinearSite& s = site(layer, name);
      if (!s.adapter) continue;
      states.push_back(
          {"layer_" + std::to_string(layer) + "." + std::string(name), *s.adapter});
    }
  }
  return states;
}

void TinyTransformer::set_adapter_states(const std::vector<AdapterState>& states) {
  for (const auto& state : states) {
    const auto dot = state.site_name.find('.');
    if (dot == std::string::npos || state.site_name.rfind("layer_", 0) != 0)
      throw ModelError("bad adapter site label: " + state.site_name);
    const int layer = std::stoi(state.site_name.substr(6, dot - 6));
    LinearSite& s = site(layer, state.site_name.substr(dot + 1));
    if (s.adapter) {
      if (s.adapter->a.rows() != state.adapter.a.rows() ||
          s.adapter->a.cols() != state.adapter.a.cols() ||
          s.adapter->b.rows() != state.adapter.b.rows() ||
          s.adapter->b.cols() != state.adapter.b.cols())
        throw ModelError("adapter shape mismatch at " + state.site_name);
    } else {
      if (state.adapter.a.cols() != s.weight.cols() || state.adapter.b.rows() != s.weight.rows())
        throw ModelError("adapter shape does not fit site " + state.site_name);
      s.frozen = true;
    }
    s.adapter = state.adapter;
  }
}

void TinyTransformer::detach_adapters() {
  for (auto& layer : layers_)
    for (LinearSite* s : {&layer.q, &layer.k, &layer.v, &layer.o, &layer.gate, &layer.up,
                          &layer.down}) {
      s->adapter.reset();
      s->frozen = false;
    }
}

void TinyTransformer::merge_all_adapters() {
  for (auto& layer : layers_)
    for (LinearSite* s : {&layer.q, &layer.k, &layer.v, &layer.o, &layer.gate, &layer.up,
                          &layer.down}) {
      if (!s->adapter) continue;
      s->weight = merge_adapter(*s);
      s->adapter.reset();
      s->frozen = false;
    }
}

namespace {

constexpr char kModelMagic[4] = {'P', 'C', 'T', 'M'};

void write_named_matrix(std::ofstream& out, const std::string& name, const Matrix& m) {
  const std::uint16_t name_len = static_cast<std::uint16_t>(name.size());
  out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
  out.write(name.data(), name_len);
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

std::pair<std::string, Matrix> read_named_matrix(std::ifstream& in) {
  std::uint16_t name_len = 0;
  in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) throw ModelError("truncated checkpoint tensor");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw ModelError("truncated checkpoint tensor");
  return {name, std::move(m)};
}

}  // namespace

void TinyTransformer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write checkpoint: " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));

  json cfg{{"vocab_size", config_.vocab_size}, {"d_model", config_.d_model},
           {"n_layers", config_.n_layers},     {"n_heads", config_.n_heads},
           {"d_ff", config_.d_ff},             {"max_seq_len", config_.max_seq_len},
           {"init_std", config_.init_std},     {"head_init_std", config_.head_init_std},
           {"norm_eps", config_.norm_eps},     {"init_seed", init_seed_}};
  const std::string cfg_text = cfg.dump();
  const std::uint64_t cfg_len = cfg_text.size();
  out.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  std::vector<std::pair<std::string, const Matrix*>> tensors;
  tensors.emplace_back("embedding", &embedding_);
  std::vector<Matrix> gain_mats;
  gain_mats.reserve(layers_.size() * 2 + 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer_" + std::to_string(l) + ".";
    tensors.emplace_back(prefix + "q_proj.weight", &layers_[l].q.weight);
    tensors.emplace_back(prefix + "k_proj.weight", &layers_[l].k.weight);
    tensors.emplace_back(prefix + "v_proj.weight", &layers_[l].v.weight);
    tensors.emplace_back(prefix + "o_proj.weight", &layers_[l].o.weight);
    tensors.emplace_back(prefix + "gate_proj.weight", &layers_[l].gate.weight);
    tensors.emplace_back(prefix + "up_proj.weight", &layers_[l].up.weight);
    tensors.emplace_back(prefix + "down_proj.weight", &layers_[l].down.weight);
    gain_mats.push_back(layers_[l].norm1_gain);
    tensors.emplace_back(prefix + "norm1.gain", &gain_mats.back());
    gain_mats.push_back(layers_[l].norm2_gain);
    tensors.emplace_back(prefix + "norm2.gain", &gain_mats.back());
  }
  gain_mats.push_back(final_norm_gain_);
  tensors.emplace_back("final_norm.gain", &gain_mats.back());
  tensors.emplace_back("lm_head.weight", &lm_head_);

  const std::uint32_t count = static_cast<std::uint32_t>(tensors.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, m] : tensors) write_named_matrix(out, name, *m);
}

TinyTransformer TinyTransformer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("checkpoint not found: " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw ModelError("not a model checkpoint: " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw ModelError("unsupported checkpoint version");

  std::uint64_t cfg_len = 0;
  in.read(reinterpret_cast<char*>(&cfg_len), sizeof(cfg_len));
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw ModelError("truncated checkpoint config");
  json cfg = json::parse(cfg_text);

  ModelConfig config;
  config.vocab_size = cfg.at("vocab_size").get<int>();
  config.d_model = cfg.at("d_model").get<int>();
  config.n_layers = cfg.at("n_layers").get<int>();
  config.n_heads = cfg.at("n_heads").get<int>();
  config.d_ff = cfg.at("d_ff").get<int>();
  config.max_seq_len = cfg.at("max_seq_len").get<int>();
  config.init_std = cfg.at("init_std").get<double>();
  config.head_init_std = cfg.at("head_init_std").get<double>();
  config.norm_eps = cfg.at("norm_eps").get<double>();

  TinyTransformer model(config, cfg.at("init_seed").get<std::uint64_t>());

  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, m] = read_named_matrix(in);
    if (name == "embedding") {
      model.embedding_ = std::move(m);
    } else if (name == "lm_head.weight") {
      model.lm_head_ = std::move(m);
    } else if (name == "final_norm.gain") {
      model.final_norm_gain_ = Vector(m);
    } else if (name.rfind("layer_", 0) == 0) {
      const auto dot = name.find('.');
      const int layer = std::stoi(name.substr(6, dot - 6));
      const std::string rest = name.substr(dot + 1);
      if (layer < 0 || layer >= config.n_layers)
        throw ModelError("checkpoint layer out of range: " + name);
      if (rest == "norm1.gain")
        model.layers_[layer].norm1_gain = Vector(m);
      else if (rest == "norm2.gain")
        model.layers_[layer].norm2_gain = Vector(m);
      else if (rest.size() > 7 && rest.substr(rest.size() - 7) == ".weight")
        model.site(layer, rest.substr(0, rest.size() - 7)).weight = std::move(m);
      else
        throw ModelError("unknown checkpoint tensor: " + name);
    } else {
      throw ModelError("unknown checkpoint tensor: " + name);
    }
  }
  return model;
}

std::string decode_loop(std::span<const int> prompt_tokens, int max_new, std::string_view stop,
                        const std::function<int(std::span<const int>)>& next_token) {
  std::vector<int> tokens(prompt_tokens.begin(), prompt_tokens.end());
  std::string continuation;
  for (int i = 0; i < max_new; ++i) {
    const int token = next_token(tokens);
    if (token == kEosId) break;
    tokens.push_back(token);
    if (token >= 0 && token < kByteTokens) {
      continuation.push_back(static_cast<char>(token));
      if (!stop.empty() && continuation.size() >= stop.size() &&
          continuation.compare(continuation.size() - stop.size(), stop.size(), stop) == 0)
        break;
    }
  }
  return continuation;
}

std::string greedy_decode(const TinyTransformer& model, std::span<const int> prompt_tokens,
                          int max_new, std::string_view stop) {
  const int max_len = model.config().max_seq_len;
  return decode_loop(prompt_tokens, max_new, stop, [&](std::span<const int> tokens) {
    if (static_cast<int>(tokens.size()) >= max_len) return kEosId;  // context exhausted
    const Matrix logits = model.forward(tokens);
    const auto last = logits.row(logits.rows() - 1);
    int best = 0;
    double best_value = last(0);
    for (Eigen::Index v = 1; v < last.size(); ++v) {
      if (last(v) > best_value) {  // ties keep the lowest id
        best_value = last(v);
        best = static_cast<int>(v);
      }
    }
    return best;
  });
}

}  // namespace percot
