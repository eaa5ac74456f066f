#include "bsq/snapshot.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "bsq/error.hpp"

namespace bsq {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'B', 'S', 'Q', 'F'};

struct Header {
  std::uint32_t basis = 0;
  std::uint32_t components = 0;
  double length = 0.0;
  std::int32_t n1 = 0, n2 = 0;
};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T take(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_raw(const std::filesystem::path& path, const Grid& g, std::uint32_t basis, std::uint32_t comps,
               std::span<const cplx> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("snapshot: cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), 4);
  put<std::uint32_t>(out, kSnapshotVersion);
  put<std::uint32_t>(out, basis);
  put<std::uint32_t>(out, comps);
  put<double>(out, g.length());
  put<std::int32_t>(out, g.n1());
  put<std::int32_t>(out, g.n2());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!out) throw ConfigError("snapshot: write failed for " + path.string());
}

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  if (!in) throw ConfigError("snapshot: cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw ConfigError("snapshot: bad magic in " + path.string());
  const auto version = take<std::uint32_t>(in);
  if (version != kSnapshotVersion) throw ConfigError("snapshot: unsupported version " + std::to_string(version));
  Header h;
  h.basis = take<std::uint32_t>(in);
  h.components = take<std::uint32_t>(in);
  h.length = take<double>(in);
  h.n1 = take<std::int32_t>(in);
  h.n2 = take<std::int32_t>(in);
  if (!in) throw ConfigError("snapshot: truncated header in " + path.string());
  return h;
}

GridPtr grid_for(const Header& h, GridPtr grid) {
  if (grid && grid->length() == h.length && grid->n1() == h.n1 && grid->n2() == h.n2) return grid;
  return Grid::create(h.length, h.n1, h.n2);
}

void read_data(std::ifstream& in, std::span<cplx> data, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!in) throw ConfigError("snapshot: truncated data in " + path.string());
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const VectorField& u) {
  write_raw(path, u.grid(), 0, 2, u.data());
}

void write_snapshot(const std::filesystem::path& path, const ScalarField& theta) {
  write_raw(path, theta.grid(), static_cast<std::uint32_t>(theta.basis()), 1, theta.data());
}

VectorField read_vector_snapshot(const std::filesystem::path& path, GridPtr grid) {
  std::ifstream in(path, std::ios::binary);
  const Header h = read_header(in, path);
  if (h.basis != 0 || h.components != 2) throw ConfigError("snapshot: " + path.string() + " is not a velocity field");
  VectorField u(grid_for(h, std::move(grid)));
  read_data(in, u.data(), path);
  return u;
}

ScalarField read_scalar_snapshot(const std::filesystem::path& path, GridPtr grid) {
  std::ifstream in(path, std::ios::binary);
  const Header h = read_header(in, path);
  if ((h.basis != 1 && h.basis != 2) || h.components != 1)
    throw ConfigError("snapshot: " + path.string() + " is not a scalar field");
  ScalarField f(grid_for(h, std::move(grid)), static_cast<ScalarBasis>(h.basis));
  read_data(in, f.data(), path);
  return f;
}

void write_checkpoint(const std::filesystem::path& dir, const std::string& stem, const SchemeState& state,
                      const ModelParams& params, std::uint64_t seed, const std::string& extra_json) {
  std::filesystem::create_directories(dir);
  write_snapshot(dir / (stem + "_u.bsq"), state.u);
  write_snapshot(dir / (stem + "_theta.bsq"), state.theta);
  nlohmann::json j;
  j["format_version"] = kSnapshotVersion;
  j["step"] = state.step;
  j["n_steps"] = state.n_steps;
  j["h"] = state.h;
  j["seed"] = seed;
  j["params"] = {{"nu", params.nu},         {"kappa", params.kappa}, {"length", params.length},
                 {"horizon", params.horizon}, {"t0", params.t0},       {"tl", params.tl},
                 {"c_l", params.c_l}};
  j["extra"] = nlohmann::json::parse(extra_json);
  std::ofstream out(dir / (stem + ".json"));
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("checkpoint: cannot write sidecar in " + dir.string());
}

SchemeState read_checkpoint(const std::filesystem::path& dir, const std::string& stem, GridPtr grid) {
  std::ifstream in(dir / (stem + ".json"));
  if (!in) throw ConfigError("checkpoint: missing sidecar " + (dir / (stem + ".json")).string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  VectorField u = read_vector_snapshot(dir / (stem + "_u.bsq"), std::move(grid));
  ScalarField theta = read_scalar_snapshot(dir / (stem + "_theta.bsq"), u.grid_ptr());
  try {
    return SchemeState{j.at("step").get<long>(), j.at("n_steps").get<int>(), j.at("h").get<double>(), std::move(u),
                       std::move(theta)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace bsq
