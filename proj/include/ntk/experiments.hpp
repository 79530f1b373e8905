#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ntk/export.hpp"

namespace ntk {

/// Config problem naming the offending field.
class ConfigError : public ArgumentError {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : ArgumentError("config field '" + field + "': " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Flat `key = value` document. '#' starts a comment; lists are comma separated.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<long long> get_ints(const std::string& key, const std::vector<long long>& fallback) const;

  /// Throws ConfigError for keys no getter asked for.
  void check_consumed() const;
  /// Every value read, defaults included.
  Json resolved() const;

 private:
  const std::string* raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  mutable std::map<std::string, std::string> resolved_;
};

struct RunContext {
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  /// Larger widths for the width sweeps.
  bool full = false;
};

/// Each command writes CSV artifacts and manifest.json into out_dir and
/// returns the summary that is also stored in the manifest.
Json cmd_ntk_convergence(const Config& config, const RunContext& ctx);
Json cmd_kernel_regression(const Config& config, const RunContext& ctx);
Json cmd_pca_convergence(const Config& config, const RunContext& ctx);
Json cmd_pd_certificate(const Config& config, const RunContext& ctx);

/// Two-sided normal quantile used for the 10th / 90th percentile bands.
inline constexpr double kZ90 = 1.2815515655446004;

double median(std::vector<double> v);

}  // namespace ntk
