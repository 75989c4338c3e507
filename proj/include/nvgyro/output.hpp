#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvgyro/config.hpp"

namespace nvgyro {

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t h);

/// Shortest decimal form that round-trips, so CSVs are reproducible bit for bit.
std::string num(double v);

/// Config values keyed as in the YAML file, plus derived quantities.
nlohmann::json parameter_ledger(const RunConfig& cfg);

/// Collects artifacts of one subcommand run and writes them under out_dir.
class ArtifactWriter {
 public:
  ArtifactWriter(std::string out_dir, std::string subcommand);

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);
  void json(const std::string& name, const nlohmann::json& value);
  /// manifest.json: config hash, code version, parameter ledger, file hashes.
  void manifest(const RunConfig& cfg, std::size_t warnings, std::size_t cell_failures);

  const std::vector<std::string>& files() const { return names_; }

 private:
  void write(const std::string& name, const std::string& bytes);
  std::string dir_;
  std::string subcommand_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> hashes_;
  std::vector<std::size_t> sizes_;
};

}  // namespace nvgyro
