#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntk/limit_kernel.hpp"
#include "ntk/numerics.hpp"

namespace ntk {

enum class Provenance { circle, sphere, gaussian, idx_file, subset };

std::string to_string(Provenance p);

struct DatasetProvenance {
  Provenance kind = Provenance::circle;
  /// Generator parameters or source file paths.
  nlohmann::json params = nlohmann::json::object();
  /// SHA-256 of the source files (idx) or empty.
  std::string file_digest;
  /// Input scaling applied at load time.
  std::string scaling = "none";
};

/// Points (N x n0), optional targets (N x n_L) and where they came from.
struct LabeledDataset {
  Matrix points;
  std::optional<Matrix> targets;
  std::vector<int> labels;
  DatasetProvenance provenance;

  Eigen::Index size() const noexcept { return points.rows(); }
  Eigen::Index input_dim() const noexcept { return points.cols(); }
  EmpiricalMeasure measure() const { return EmpiricalMeasure(points); }
  /// {provenance, N, n0, digest, scaling, ...}.
  nlohmann::json manifest() const;
};

/// (cos g_i, sin g_i) with g_i = angle_offset + 2 pi i / count.
LabeledDataset circle_dataset(int count, double angle_offset = 0.0);

/// Points on the unit circle at the given angles.
Matrix circle_points(const std::vector<double>& angles);

/// iid uniform on S^{n0-1} (normalized Gaussians), rows pairwise distinct.
LabeledDataset sphere_dataset(int count, int n0, RngStream rng);

/// iid N(0, I) rows.
LabeledDataset gaussian_dataset(int count, int n0, RngStream rng);

enum class TargetEncoding { none, scalar, one_hot };

struct IdxOptions {
  std::optional<Eigen::Index> limit;
  TargetEncoding targets = TargetEncoding::none;
};

/// Big-endian IDX pair: images (magic 0x00000803, N x rows x cols, unsigned
/// bytes) and labels (magic 0x00000801, N). Pixels are scaled by 1/255.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        const IdxOptions& options = {});

/// Writes an IDX pair; `pixels` is N x (rows * cols).
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& label_bytes,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols);

/// `count` rows drawn without replacement by a seeded Fisher-Yates shuffle.
LabeledDataset sample_rows(const LabeledDataset& source, Eigen::Index count, RngStream rng);

/// SHA-256 over (rows, cols, entries row-major as little-endian IEEE-754),
/// identical on every platform for identical values.
std::string matrix_digest(const Matrix& m);

/// SHA-256 of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace ntk
