#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace percot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Low-rank pair attached to one frozen linear layer. The effective update is
// scale() * b * a with scale = alpha / rank.
struct LoraAdapter {
  Matrix a;  // rank x in_dim, trainable
  Matrix b;  // out_dim x rank, trainable
  int rank = 0;
  double alpha = 0.0;

  double scale() const { return alpha / rank; }
};

// b starts at zero so the adapted layer initially equals the base layer;
// a is seeded Gaussian with standard deviation 0.02.
LoraAdapter init_adapter(int out_dim, int in_dim, int rank, double alpha, std::uint64_t seed);

// One linear projection site of the host model.
struct LinearSite {
  Matrix weight;  // out_dim x in_dim
  bool frozen = false;
  std::optional<LoraAdapter> adapter;

  int out_dim() const { return static_cast<int>(weight.rows()); }
  int in_dim() const { return static_cast<int>(weight.cols()); }
};

// h = W x + s B (A x), without materializing B*A. Columns of x are independent
// inputs.
Matrix lora_forward(const Matrix& x, const LinearSite& site);
Matrix lora_forward(const Matrix& x, const Matrix& weight, const LoraAdapter& adapter);

// W' = W + s B A.
Matrix merge_adapter(const LinearSite& site);
Matrix merge_adapter(const Matrix& weight, const LoraAdapter& adapter);

// Serialized adapter state for one site.
struct AdapterState {
  std::string site_name;  // "layer_<i>.<site>"
  LoraAdapter adapter;
};

// Adapter-only checkpoint: metadata JSON plus (site name -> A, B, r, alpha).
void save_adapters(const std::filesystem::path& path, const std::string& metadata_json,
                   const std::vector<AdapterState>& states);
struct AdapterCheckpoint {
  std::string metadata_json;
  std::vector<AdapterState> states;
};
AdapterCheckpoint load_adapters(const std::filesystem::path& path);

class TinyTransformer;

// Attaches one fresh adapter per named site on every layer. Freezes the base
// weights of targeted sites. Throws ModelError on unknown site names or an
// infeasible rank. Returns the trainable parameter count.
std::size_t attach_adapters(TinyTransformer& model, const std::vector<std::string>& target_sites,
                            int rank, double alpha, std::uint64_t seed);

std::size_t trainable_parameter_count(const TinyTransformer& model);

}  // namespace percot
