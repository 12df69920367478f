#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "branchlab/core.hpp"

#include <json.hpp>

namespace branchlab {

/// Kernel ingestion. The JSON schema is the artifact's single input format:
/// {"space": {"labels": [...], "metric"?: [[...]]},
///  "laws": [{"type": "explicit"|"multinomial"|"geometric", ...}, ...],
///  "boundary": "kill"|"survive_outside"}.
/// Explicit configs are arrays of [label, count]; the reserved label "@out"
/// addresses mass sent past the truncation, as does an (N+1)-th dispersal
/// entry. Renormalization of slightly-off masses only happens when asked.
Kernel kernel_from_json(const nlohmann::json& j, bool renormalize = false,
                        std::vector<std::string>* notes = nullptr);
Kernel load_kernel(const std::string& path, bool renormalize = false,
                   std::vector<std::string>* notes = nullptr);
nlohmann::json kernel_to_json(const Kernel& kernel);
void save_kernel(const Kernel& kernel, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

/// FNV-1a 64 content digest, prefixed "fnv1a:".
std::string content_digest(const std::string& bytes);

/// Minimal streaming JSON writer with deterministic key order and doubles
/// printed to 17 significant digits, so re-running a manifest reproduces
/// byte-identical output.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();
  JsonWriter& values(const std::vector<double>& v);

  const std::string& str() const { return out_; }

 private:
  void separator();
  std::string out_;
  std::vector<bool> needs_comma_;
  bool pending_key_ = false;
};

std::string format_double(double v);

}  // namespace branchlab
