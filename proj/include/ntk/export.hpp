#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ntk/finite_net.hpp"
#include "ntk/limit_kernel.hpp"

namespace ntk {

using Json = nlohmann::json;

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// RFC-4180 style CSV: header row, comma separated, fields quoted when needed.
class CsvWriter {
 public:
  using Field = std::variant<std::string, double, long long>;

  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  void row(const std::vector<Field>& fields);
  std::size_t rows() const noexcept { return rows_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::size_t rows_ = 0;
};

/// Gram as CSV with columns (i, j, value); the full (N n_L)^2 matrix.
void write_gram_csv(const std::filesystem::path& path, const KernelGram& gram);

void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

/// Rows (step, t, loss, residual, drift); drift is relative to the first
/// snapshot's NTK and left empty when NTKs were not recorded.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

/// Flat little-endian binary of flatten() order in the parameter dtype,
/// plus `<path>.json` describing shapes, dtype and seed.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const BasicNetworkParams<T>& params,
                     const Json& provenance = Json::object());

template <class T>
BasicNetworkParams<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace ntk
