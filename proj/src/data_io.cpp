#include "ntk/data_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <sstream>

namespace ntk {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error("SHA-256 initialization failed");
    }
  }

  void update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx_.get(), data, len) != 1) throw Error("SHA-256 update failed");
  }

  void update_u64_le(std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    update(b.data(), b.size());
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (buf.size() < offset + 4) {
    throw LengthError("'" + path.string() + "' ends inside its header (" +
                      std::to_string(buf.size()) + " bytes)");
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void check_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
  if (found != expected) {
    std::ostringstream os;
    os << "bad IDX magic in '" << path.string() << "': expected 0x" << std::hex << std::setw(8)
       << std::setfill('0') << expected << ", found 0x" << std::setw(8) << found;
    throw FormatError(os.str());
  }
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::circle:
      return "circle";
    case Provenance::sphere:
      return "sphere";
    case Provenance::gaussian:
      return "gaussian";
    case Provenance::idx_file:
      return "idx_file";
    case Provenance::subset:
      return "subset";
  }
  return "circle";
}

nlohmann::json LabeledDataset::manifest() const {
  nlohmann::json j;
  j["provenance"] = to_string(provenance.kind);
  j["params"] = provenance.params;
  j["N"] = size();
  j["n0"] = input_dim();
  j["digest"] = matrix_digest(points);
  j["scaling"] = provenance.scaling;
  if (!provenance.file_digest.empty()) j["file_digest"] = provenance.file_digest;
  return j;
}

Matrix circle_points(const std::vector<double>& angles) {
  Matrix pts(static_cast<Eigen::Index>(angles.size()), 2);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    pts(i, 0) = std::cos(angles[i]);
    pts(i, 1) = std::sin(angles[i]);
  }
  return pts;
}

LabeledDataset circle_dataset(int count, double angle_offset) {
  if (count < 1) throw ArgumentError("circle_dataset: count must be at least 1");
  std::vector<double> angles(count);
  for (int i = 0; i < count; ++i) angles[i] = angle_offset + 2.0 * std::numbers::pi * i / count;
  LabeledDataset ds;
  ds.points = circle_points(angles);
  ds.provenance.kind = Provenance::circle;
  ds.provenance.params = {{"count", count}, {"angle_offset", angle_offset}};
  return ds;
}

LabeledDataset sphere_dataset(int count, int n0, RngStream rng) {
  if (n0 < 2) throw ArgumentError("sphere_dataset: n0 must be at least 2");
  if (count < 0) throw ArgumentError("sphere_dataset: negative count");
  LabeledDataset ds;
  ds.points.resize(count, n0);
  ds.provenance.kind = Provenance::sphere;
  ds.provenance.params = {{"count", count}, {"n0", n0}, {"seed", rng.seed()}, {"stream", rng.stream()}};
  Eigen::Index filled = 0;
  while (filled < count) {
    Vector v = standard_normal(rng, n0);
    const double norm = v.norm();
    if (!(norm > 0.0)) continue;
    v /= norm;
    bool duplicate = false;
    for (Eigen::Index i = 0; i < filled && !duplicate; ++i) duplicate = ds.points.row(i) == v.transpose();
    if (duplicate) continue;
    ds.points.row(filled++) = v.transpose();
  }
  return ds;
}

LabeledDataset gaussian_dataset(int count, int n0, RngStream rng) {
  if (count < 0 || n0 < 1) throw ArgumentError("gaussian_dataset: bad shape");
  LabeledDataset ds;
  ds.points.resize(count, n0);
  for (Eigen::Index i = 0; i < count; ++i) ds.points.row(i) = standard_normal(rng, n0).transpose();
  ds.provenance.kind = Provenance::gaussian;
  ds.provenance.params = {{"count", count}, {"n0", n0}, {"seed", rng.seed()}, {"stream", rng.stream()}};
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        const IdxOptions& options) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  check_magic(read_be32(img, 0, images), kImagesMagic, images);
  check_magic(read_be32(lab, 0, labels), kLabelsMagic, labels);

  const std::uint64_t n = read_be32(img, 4, images);
  const std::uint64_t rows = read_be32(img, 8, images);
  const std::uint64_t cols = read_be32(img, 12, images);
  const std::uint64_t n_labels = read_be32(lab, 4, labels);
  const std::uint64_t pixels = rows * cols;
  if (img.size() < 16 + n * pixels) {
    throw LengthError("'" + images.string() + "' holds " + std::to_string(img.size() - 16) +
                      " payload bytes, header promises " + std::to_string(n * pixels));
  }
  if (lab.size() < 8 + n_labels) {
    throw LengthError("'" + labels.string() + "' holds " + std::to_string(lab.size() - 8) +
                      " labels, header promises " + std::to_string(n_labels));
  }
  if (n != n_labels) {
    throw ConsistencyError("image file has " + std::to_string(n) + " samples but label file has " +
                           std::to_string(n_labels));
  }

  std::uint64_t keep = n;
  if (options.limit) keep = std::min<std::uint64_t>(keep, static_cast<std::uint64_t>(*options.limit));

  LabeledDataset ds;
  ds.points.resize(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(pixels));
  ds.labels.resize(keep);
  for (std::uint64_t i = 0; i < keep; ++i) {
    for (std::uint64_t p = 0; p < pixels; ++p) ds.points(i, p) = img[16 + i * pixels + p] / 255.0;
    ds.labels[i] = lab[8 + i];
  }
  if (options.targets == TargetEncoding::scalar) {
    Matrix t(keep, 1);
    for (std::uint64_t i = 0; i < keep; ++i) t(i, 0) = ds.labels[i];
    ds.targets = std::move(t);
  } else if (options.targets == TargetEncoding::one_hot) {
    Matrix t = Matrix::Zero(keep, 10);
    for (std::uint64_t i = 0; i < keep; ++i) {
      if (ds.labels[i] > 9) throw FormatError("label " + std::to_string(ds.labels[i]) + " > 9");
      t(i, ds.labels[i]) = 1.0;
    }
    ds.targets = std::move(t);
  }
  ds.provenance.kind = Provenance::idx_file;
  ds.provenance.params = {{"images", images.string()},
                          {"labels", labels.string()},
                          {"rows", rows},
                          {"cols", cols},
                          {"limit", keep}};
  Sha256 h;
  h.update(img.data(), img.size());
  h.update(lab.data(), lab.size());
  ds.provenance.file_digest = h.hex();
  ds.provenance.scaling = "pixel/255";
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& label_bytes,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols || label_bytes.size() != count) {
    throw ArgumentError("write_idx: buffer sizes do not match the header");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error("write_idx: cannot open output files");
  write_be32(img, kImagesMagic);
  write_be32(img, count);
  write_be32(img, rows);
  write_be32(img, cols);
  img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  write_be32(lab, kLabelsMagic);
  write_be32(lab, count);
  lab.write(reinterpret_cast<const char*>(label_bytes.data()),
            static_cast<std::streamsize>(label_bytes.size()));
}

LabeledDataset sample_rows(const LabeledDataset& source, Eigen::Index count, RngStream rng) {
  const auto n = source.size();
  if (count < 0 || count > n) {
    throw ArgumentError("sample_rows: cannot draw " + std::to_string(count) + " of " +
                        std::to_string(n) + " rows");
  }
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[i], order[j]);
  }
  LabeledDataset out;
  out.points.resize(count, source.input_dim());
  if (source.targets) out.targets = Matrix(count, source.targets->cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    out.points.row(i) = source.points.row(order[i]);
    if (source.targets) out.targets->row(i) = source.targets->row(order[i]);
    if (!source.labels.empty()) out.labels.push_back(source.labels[order[i]]);
  }
  out.provenance = source.provenance;
  out.provenance.kind = Provenance::subset;
  out.provenance.params = {{"source", source.manifest()},
                           {"count", count},
                           {"seed", rng.seed()},
                           {"stream", rng.stream()}};
  return out;
}

std::string matrix_digest(const Matrix& m) {
  Sha256 h;
  h.update_u64_le(static_cast<std::uint64_t>(m.rows()));
  h.update_u64_le(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) h.update_u64_le(std::bit_cast<std::uint64_t>(m(i, j)));
  return h.hex();
}

std::string file_digest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

}  // namespace ntk
