#pragma once

// Key table shared by the YAML parser, the canonical rendering used for the
// config hash, and the manifest's parameter ledger.

#include <string>
#include <vector>

#include "nvgyro/config.hpp"

namespace nvgyro {

struct SchemaField {
  enum class Kind { Double, Int, U64, String, Vec3, DoubleList, IntList, Grid };
  const char* key;
  Kind kind;
  void* ptr;
  double scale = 1.0;  // stored value = scale * value in the file
  bool required = false;
};

struct SchemaSection {
  const char* name;
  std::vector<SchemaField> fields;
};

/// Field table bound to cfg; the pointers stay valid while cfg lives.
std::vector<SchemaSection> config_schema(RunConfig& cfg);

/// Canonical YAML text of a config. Without the output section it is the hash input.
std::string render_config(const RunConfig& cfg, bool include_output);

}  // namespace nvgyro
