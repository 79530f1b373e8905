#include "ntk/export.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>

#include "ntk/errors.hpp"

namespace ntk {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

template <class T>
constexpr const char* dtype_name() {
  return sizeof(T) == 8 ? "f64" : "f32";
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : out_(open_out(path)), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << quote(header[i]);
  out_ << "\r\n";
}

void CsvWriter::row(const std::vector<Field>& fields) {
  if (fields.size() != columns_) {
    throw ArgumentError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    std::visit(
        [&](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, std::string>) {
            out_ << quote(v);
          } else if constexpr (std::is_same_v<V, double>) {
            out_ << format_double(v);
          } else {
            out_ << v;
          }
        },
        fields[i]);
  }
  out_ << "\r\n";
  ++rows_;
  if (!out_) throw Error("CSV write failed");
}

void write_gram_csv(const std::filesystem::path& path, const KernelGram& gram) {
  const Matrix m = gram.full();
  CsvWriter csv(path, {"i", "j", "value"});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) csv.row({(long long)i, (long long)j, m(i, j)});
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error("JSON write failed for " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  CsvWriter csv(path, {"step", "t", "loss", "residual", "drift"});
  const KernelGram* first = nullptr;
  if (!traj.snapshots.empty() && traj.snapshots.front().ntk) first = &*traj.snapshots.front().ntk;
  for (const auto& s : traj.snapshots) {
    CsvWriter::Field drift = std::string();
    if (first && s.ntk) drift = relative_frobenius(s.ntk->entries.matrix(), first->entries.matrix());
    csv.row({(long long)s.step, s.t, s.loss, s.residual, drift});
  }
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const BasicNetworkParams<T>& params,
                     const Json& provenance) {
  params.check_shapes();
  if (params.arch.nl.kind() == NonlinearityKind::custom) {
    throw ArgumentError("checkpoints cannot describe a custom nonlinearity");
  }
  auto out = open_out(path, std::ios::binary);
  Json layers = Json::array();
  std::uint64_t offset = 0;
  using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  auto put = [&](T v) {
    Bits b = std::bit_cast<Bits>(v);
    for (std::size_t k = 0; k < sizeof(Bits); ++k) out.put(static_cast<char>((b >> (8 * k)) & 0xff));
  };
  for (int l = 0; l < params.arch.depth(); ++l) {
    const auto& w = params.weights[l];
    const auto& b = params.biases[l];
    layers.push_back({{"name", "W" + std::to_string(l)},
                      {"shape", {w.rows(), w.cols()}},
                      {"order", "column-major"},
                      {"offset", offset}});
    for (Eigen::Index k = 0; k < w.size(); ++k) put(w.data()[k]);
    offset += static_cast<std::uint64_t>(w.size());
    layers.push_back({{"name", "b" + std::to_string(l)}, {"shape", {b.size()}}, {"offset", offset}});
    for (Eigen::Index k = 0; k < b.size(); ++k) put(b(k));
    offset += static_cast<std::uint64_t>(b.size());
  }
  if (!out) throw Error("checkpoint write failed for " + path.string());

  std::string nl = params.arch.nl.name();
  if (params.arch.nl.is_polynomial()) {
    nl = "poly:";
    const auto& c = params.arch.nl.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) nl += (i ? "," : "") + format_double(c[i]);
  }
  Json sidecar = {{"format", "ntk-checkpoint"},
                  {"version", 1},
                  {"dtype", dtype_name<T>()},
                  {"endianness", "little"},
                  {"widths", params.arch.widths},
                  {"beta", params.arch.beta},
                  {"nonlinearity", nl},
                  {"count", offset},
                  {"layers", layers},
                  {"provenance", provenance}};
  write_json(path.string() + ".json", sidecar);
}

template <class T>
BasicNetworkParams<T> load_checkpoint(const std::filesystem::path& path) {
  const Json side = read_json(path.string() + ".json");
  try {
    if (side.at("format") != "ntk-checkpoint") throw FormatError(path.string() + ": not a checkpoint sidecar");
    if (side.at("dtype") != dtype_name<T>()) {
      throw FormatError(path.string() + ": dtype is " + side.at("dtype").get<std::string>() + ", expected " +
                        dtype_name<T>());
    }
    Architecture arch{side.at("widths").get<std::vector<Eigen::Index>>(), side.at("beta").get<double>(),
                      Nonlinearity::parse(side.at("nonlinearity").get<std::string>())};
    arch.validate();
    BasicNetworkParams<T> p;
    p.arch = arch;
    for (int l = 0; l < arch.depth(); ++l) {
      p.weights.emplace_back(arch.widths[l + 1], arch.widths[l]);
      p.biases.emplace_back(arch.widths[l + 1]);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    const auto expected = static_cast<std::uintmax_t>(arch.parameter_count()) * sizeof(T);
    if (std::filesystem::file_size(path) != expected) {
      throw LengthError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(std::filesystem::file_size(path)));
    }
    using Bits = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    auto get = [&]() {
      std::array<unsigned char, sizeof(Bits)> raw;
      in.read(reinterpret_cast<char*>(raw.data()), raw.size());
      Bits b = 0;
      for (std::size_t k = 0; k < raw.size(); ++k) b |= static_cast<Bits>(raw[k]) << (8 * k);
      return std::bit_cast<T>(b);
    };
    for (int l = 0; l < arch.depth(); ++l) {
      for (Eigen::Index k = 0; k < p.weights[l].size(); ++k) p.weights[l].data()[k] = get();
      for (Eigen::Index k = 0; k < p.biases[l].size(); ++k) p.biases[l](k) = get();
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ".json: " + e.what());
  }
}

template void save_checkpoint<double>(const std::filesystem::path&, const NetworkParams&, const Json&);
template void save_checkpoint<float>(const std::filesystem::path&, const NetworkParamsF32&, const Json&);
template NetworkParams load_checkpoint<double>(const std::filesystem::path&);
template NetworkParamsF32 load_checkpoint<float>(const std::filesystem::path&);

}  // namespace ntk
