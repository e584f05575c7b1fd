#include "percot/lora.hpp"

#include <json.hpp>

#include <fstream>

#include "percot/tinylm.hpp"
#include "rng.hpp"

namespace percot {

LoraAdapter init_adapter(int out_dim, int in_dim, int rank, double alpha, std::uint64_t seed) {
  if (rank <= 0 || alpha <= 0.0)
    throw ModelError("adapter rank and alpha must be positive");
  if (rank > std::min(out_dim, in_dim))
    throw ModelError("adapter rank " + std::to_string(rank) + " exceeds min(d, k) = " +
                     std::to_string(std::min(out_dim, in_dim)));

  LoraAdapter adapter;
  adapter.rank = rank;
  adapter.alpha = alpha;
  adapter.b = Matrix::Zero(out_dim, rank);
  adapter.a = Matrix(rank, in_dim);
  detail::GaussianRng rng(seed);
  for (int r = 0; r < rank; ++r)
    for (int c = 0; c < in_dim; ++c) adapter.a(r, c) = rng.normal(0.02);
  return adapter;
}

Matrix lora_forward(const Matrix& x, const Matrix& weight, const LoraAdapter& adapter) {
  if (x.rows() != weight.cols())
    throw ModelError("input dimension " + std::to_string(x.rows()) +
                     " does not match weight columns " + std::to_string(weight.cols()));
  if (adapter.a.cols() != weight.cols() || adapter.b.rows() != weight.rows())
    throw ModelError("adapter shape does not compose with the host weight");
  // Two thin products; B*A is never materialized here.
  return weight * x + adapter.scale() * (adapter.b * (adapter.a * x));
}

Matrix lora_forward(const Matrix& x, const LinearSite& site) {
  if (!site.adapter) {
    if (x.rows() != site.weight.cols())
      throw ModelError("input dimension " + std::to_string(x.rows()) +
                       " does not match weight columns " + std::to_string(site.weight.cols()));
    return site.weight * x;
  }
  return lora_forward(x, site.weight, *site.adapter);
}

Matrix merge_adapter(const Matrix& weight, const LoraAdapter& adapter) {
  if (adapter.a.cols() != weight.cols() || adapter.b.rows() != weight.rows())
    throw ModelError("adapter shape does not compose with the host weight");
  return weight + adapter.scale() * (adapter.b * adapter.a);
}

Matrix merge_adapter(const LinearSite& site) {
  if (!site.adapter) return site.weight;
  return merge_adapter(site.weight, *site.adapter);
}

std::size_t attach_adapters(TinyTransformer& model, const std::vector<std::string>& target_sites,
                            int rank, double alpha, std::uint64_t seed) {
  for (const auto& name : target_sites) {
    bool known = false;
    for (auto site_name : kSiteNames)
      if (name == site_name) known = true;
    if (!known) throw ModelError("unknown adapter target site: " + name);
  }

  std::size_t trainable = 0;
  std::uint64_t site_counter = 0;
  for (int layer = 0; layer < model.config().n_layers; ++layer) {
    // Canonical site order keeps seeding independent of the target list order.
    for (auto site_name : kSiteNames) {
      bool targeted = false;
      for (const auto& name : target_sites)
        if (name == site_name) targeted = true;
      if (!targeted) continue;
      LinearSite& site = model.site(layer, site_name);
      if (site.adapter) throw ModelError("site already carries an adapter");
      site.adapter =
          init_adapter(site.out_dim(), site.in_dim(), rank, alpha, seed * 1000003 + site_counter);
      site.frozen = true;
      trainable += static_cast<std::size_t>(rank) * (site.out_dim() + site.in_dim());
      ++site_counter;
    }
  }
  return trainable;
}

std::size_t trainable_parameter_count(const TinyTransformer& model) {
  std::size_t count = 0;
  for (int layer = 0; layer < model.config().n_layers; ++layer) {
    for (auto site_name : kSiteNames) {
      const LinearSite& site = model.site(layer, site_name);
      if (site.adapter) count += site.adapter->a.size() + site.adapter->b.size();
    }
  }
  return count;
}

namespace {

void write_matrix(std::ofstream& out, const Matrix& m) {
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix read_matrix(std::ifstream& in) {
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) throw ModelError("truncated tensor header");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw ModelError("truncated tensor data");
  return m;
}

void write_string(std::ofstream& out, const std::string& s) {
  const std::uint64_t len = s.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw ModelError("truncated string");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw ModelError("truncated string");
  return s;
}

constexpr char kAdapterMagic[4] = {'P', 'C', 'L', 'A'};

}  // namespace

void save_adapters(const std::filesystem::path& path, const std::string& metadata_json,
                   const std::vector<AdapterState>& states) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write adapter checkpoint: " + path.string());
  out.write(kAdapterMagic, sizeof(kAdapterMagic));
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  write_string(out, metadata_json);
  const std::uint32_t count = static_cast<std::uint32_t>(states.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& state : states) {
    write_string(out, state.site_name);
    const std::uint32_t rank = static_cast<std::uint32_t>(state.adapter.rank);
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    out.write(reinterpret_cast<const char*>(&state.adapter.alpha), sizeof(double));
    write_matrix(out, state.adapter.a);
    write_matrix(out, state.adapter.b);
  }
}

AdapterCheckpoint load_adapters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("adapter checkpoint not found: " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kAdapterMagic, 4) != 0)
    throw ModelError("not an adapter checkpoint: " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw ModelError("unsupported adapter checkpoint version");

  AdapterCheckpoint ckpt;
  ckpt.metadata_json = read_string(in);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    AdapterState state;
    state.site_name = read_string(in);
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    in.read(reinterpret_cast<char*>(&state.adapter.alpha), sizeof(double));
    state.adapter.rank = static_cast<int>(rank);
    state.adapter.a = read_matrix(in);
    state.adapter.b = read_matrix(in);
    ckpt.states.push_back(std::move(state));
  }
  return ckpt;
}

}  // namespace percot
