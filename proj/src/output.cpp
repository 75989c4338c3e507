#include "nvgyro/output.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "nvgyro/config_schema.hpp"
#include "nvgyro/version.hpp"

namespace nvgyro {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string num(double v) { return fmt::format("{}", v); }

nlohmann::json parameter_ledger(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  using K = SchemaField::Kind;
  nlohmann::json out = nlohmann::json::object();
  for (const auto& sec : config_schema(cfg)) {
    if (std::string(sec.name) == "output") continue;
    nlohmann::json s = nlohmann::json::object();
    for (const auto& f : sec.fields) {
      switch (f.kind) {
        case K::Double:
          s[f.key] = *static_cast<const double*>(f.ptr) / f.scale;
          break;
        case K::Int:
          s[f.key] = *static_cast<const int*>(f.ptr);
          break;
        case K::U64:
          s[f.key] = *static_cast<const std::uint64_t*>(f.ptr);
          break;
        case K::String:
          s[f.key] = *static_cast<const std::string*>(f.ptr);
          break;
        case K::Vec3: {
          const auto* p = static_cast<const double*>(f.ptr);
          s[f.key] = {p[0] / f.scale, p[1] / f.scale, p[2] / f.scale};
          break;
        }
        case K::DoubleList:
          s[f.key] = *static_cast<const std::vector<double>*>(f.ptr);
          break;
        case K::IntList:
          s[f.key] = *static_cast<const std::vector<int>*>(f.ptr);
          break;
        case K::Grid: {
          const auto& g = *static_cast<const GridSpec*>(f.ptr);
          s[f.key] = {{"start", g.start}, {"stop", g.stop}, {"points", g.points}, {"log", g.log}};
          break;
        }
      }
    }
    out[sec.name] = s;
  }
  const LambdaParams p = cfg.resolved_lambda();
  out["derived"] = {
      {"g_s_hz", p.g_s / kTwoPi},
      {"drive_J_rad_s", p.J},
      {"kappa_total_hz", p.kappa() / kTwoPi},
      {"seed", cfg.seed},
  };
  return out;
}

ArtifactWriter::ArtifactWriter(std::string out_dir, std::string subcommand)
    : dir_(std::move(out_dir)), subcommand_(std::move(subcommand)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError(dir_ + ": cannot create output directory (" + ec.message() + ")");
}

void ArtifactWriter::write(const std::string& name, const std::string& bytes) {
  const auto path = std::filesystem::path(dir_) / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError(path.string() + ": write failed");
  names_.push_back(name);
  hashes_.push_back(fnv1a64(bytes));
  sizes_.push_back(bytes.size());
}

void ArtifactWriter::csv(const std::string& name, const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string s = fmt::format("{}\n", fmt::join(header, ","));
  for (const auto& r : rows) s += fmt::format("{}\n", fmt::join(r, ","));
  write(name, s);
}

void ArtifactWriter::json(const std::string& name, const nlohmann::json& value) { write(name, value.dump(2) + "\n"); }

void ArtifactWriter::manifest(const RunConfig& cfg, std::size_t warnings, std::size_t cell_failures) {
  nlohmann::json m;
  m["tool"] = "nvgyro";
  m["version"] = kVersion;
  m["subcommand"] = subcommand_;
  m["config_hash"] = hex64(fnv1a64(render_config(cfg, false)));
  m["seed"] = cfg.seed;
  m["warnings"] = warnings;
  m["cell_failures"] = cell_failures;
  m["parameters"] = parameter_ledger(cfg);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < names_.size(); ++i)
    files.push_back({{"name", names_[i]}, {"bytes", sizes_[i]}, {"fnv1a64", hex64(hashes_[i])}});
  m["files"] = files;
  write("manifest.json", m.dump(2) + "\n");
}

}  // namespace nvgyro
