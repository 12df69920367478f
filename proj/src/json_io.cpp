#include "branchlab/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace branchlab {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message) {
  fail("BadKernelFile", message);
}

double require_number(const json& j, const std::string& what) {
  if (!j.is_number()) bad(what + " must be a number");
  return j.get<double>();
}

struct LabelIndex {
  std::unordered_map<std::string, SiteIndex> map;
  SiteIndex resolve(const std::string& label) const {
    auto it = map.find(label);
    if (it == map.end()) bad("unknown site label '" + label + "'");
    return it->second;
  }
};

Config parse_config(const json& j, const LabelIndex& labels) {
  if (!j.is_array()) bad("config must be an array of [label, count] pairs");
  std::vector<std::pair<SiteIndex, std::uint32_t>> pairs;
  std::uint32_t outside = 0;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
        !entry[1].is_number_unsigned())
      bad("config entries must be [label, positive count] pairs");
    std::uint64_t count = entry[1].get<std::uint64_t>();
    if (count == 0) bad("config counts must be >= 1");
    std::string label = entry[0].get<std::string>();
    if (label == "@out")
      outside += static_cast<std::uint32_t>(count);
    else
      pairs.emplace_back(labels.resolve(label),
                         static_cast<std::uint32_t>(count));
  }
  return Config::from_pairs(std::move(pairs), outside);
}

void parse_dispersal(const json& j, std::size_t n, std::vector<double>& row,
                     double& outside, bool renormalize,
                     std::vector<std::string>* notes) {
  if (!j.is_array() || (j.size() != n && j.size() != n + 1))
    bad("dispersal must be an array of N (or N+1 with boundary mass) numbers");
  row.clear();
  for (std::size_t i = 0; i < n; ++i) row.push_back(require_number(j[i], "dispersal"));
  outside = j.size() == n + 1 ? require_number(j[n], "dispersal") : 0.0;
  if (renormalize) {
    double sum = outside;
    for (double p : row) sum += p;
    if (sum > 0.0 && std::abs(sum - 1.0) > kMassTol) {
      for (double& p : row) p /= sum;
      outside /= sum;
      if (notes)
        notes->push_back("renormalized a dispersal row by " +
                         format_double(sum));
    }
  }
}

}  // namespace

Kernel kernel_from_json(const json& j, bool renormalize,
                        std::vector<std::string>* notes) {
  if (!j.is_object()) bad("kernel file must be a JSON object");
  if (!j.contains("space") || !j["space"].is_object())
    bad("missing 'space' object");
  const json& space = j["space"];
  if (!space.contains("labels") || !space["labels"].is_array())
    bad("space needs a 'labels' array");

  Kernel kernel;
  LabelIndex labels;
  for (const auto& lab : space["labels"]) {
    if (!lab.is_string()) bad("labels must be strings");
    std::string s = lab.get<std::string>();
    if (s == "@out") bad("'@out' is reserved for the boundary");
    if (!labels.map.emplace(s, static_cast<SiteIndex>(kernel.space.labels.size()))
             .second)
      bad("duplicate label '" + s + "'");
    kernel.space.labels.push_back(std::move(s));
  }
  const std::size_t n = kernel.space.labels.size();
  if (n == 0) bad("empty label list");

  if (space.contains("metric")) {
    if (!space["metric"].is_array()) bad("metric must be an array of rows");
    std::vector<std::vector<double>> metric;
    for (const auto& row : space["metric"]) {
      if (!row.is_array() || row.size() != n) bad("metric rows must have N entries");
      std::vector<double> r;
      for (const auto& v : row) r.push_back(require_number(v, "metric"));
      metric.push_back(std::move(r));
    }
    if (metric.size() != n) bad("metric must have N rows");
    kernel.space.metric = std::move(metric);
  }

  if (!j.contains("laws") || !j["laws"].is_array() || j["laws"].size() != n)
    bad("'laws' must be an array with one entry per label");

  for (std::size_t x = 0; x < n; ++x) {
    const json& law = j["laws"][x];
    if (!law.is_object() || !law.contains("type") || !law["type"].is_string())
      bad("each law needs a 'type'");
    std::string type = law["type"].get<std::string>();
    if (type == "explicit") {
      if (!law.contains("support") || !law["support"].is_array())
        bad("explicit law needs a 'support' array");
      ExplicitLaw ex;
      double mass = 0.0;
      for (const auto& atom : law["support"]) {
        if (!atom.is_object() || !atom.contains("config") || !atom.contains("p"))
          bad("support atoms are {config, p}");
        double p = require_number(atom["p"], "support probability");
        mass += p;
        ex.support.emplace_back(parse_config(atom["config"], labels), p);
      }
      if (renormalize && mass > 0.0 && std::abs(mass - 1.0) > kMassTol) {
        for (auto& [cfg, p] : ex.support) p /= mass;
        if (notes)
          notes->push_back("renormalized an explicit law by " +
                           format_double(mass));
      }
      kernel.laws.push_back(std::move(ex));
    } else if (type == "multinomial") {
      if (!law.contains("total_pmf") || !law["total_pmf"].is_array())
        bad("multinomial law needs 'total_pmf'");
      MultinomialLaw mn;
      double mass = 0.0;
      for (const auto& pair : law["total_pmf"]) {
        if (!pair.is_array() || pair.size() != 2 ||
            !pair[0].is_number_unsigned())
          bad("total_pmf entries are [count, probability]");
        double p = require_number(pair[1], "total_pmf probability");
        mass += p;
        mn.total_pmf.emplace_back(pair[0].get<std::uint32_t>(), p);
      }
      std::sort(mn.total_pmf.begin(), mn.total_pmf.end());
      if (renormalize && mass > 0.0 && std::abs(mass - 1.0) > kMassTol) {
        for (auto& [c, p] : mn.total_pmf) p /= mass;
        if (notes)
          notes->push_back("renormalized a total_pmf by " + format_double(mass));
      }
      if (!law.contains("dispersal")) bad("multinomial law needs 'dispersal'");
      parse_dispersal(law["dispersal"], n, mn.dispersal, mn.dispersal_outside,
                      renormalize, notes);
      kernel.laws.push_back(std::move(mn));
    } else if (type == "geometric") {
      if (!law.contains("mean")) bad("geometric law needs 'mean'");
      GeometricLaw geo;
      geo.mean = require_number(law["mean"], "geometric mean");
      if (!law.contains("dispersal")) bad("geometric law needs 'dispersal'");
      parse_dispersal(law["dispersal"], n, geo.dispersal, geo.dispersal_outside,
                      renormalize, notes);
      kernel.laws.push_back(std::move(geo));
    } else {
      bad("unknown law type '" + type + "'");
    }
  }

  kernel.boundary = BoundaryPolicy::kKill;
  if (j.contains("boundary")) {
    if (!j["boundary"].is_string()) bad("'boundary' must be a string");
    std::string b = j["boundary"].get<std::string>();
    if (b == "kill")
      kernel.boundary = BoundaryPolicy::kKill;
    else if (b == "survive_outside")
      kernel.boundary = BoundaryPolicy::kSurviveOutside;
    else
      bad("boundary must be 'kill' or 'survive_outside'");
  }
  return kernel;
}

Kernel load_kernel(const std::string& path, bool renormalize,
                   std::vector<std::string>* notes) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    bad("cannot parse '" + path + "': " + e.what());
  }
  return kernel_from_json(j, renormalize, notes);
}

nlohmann::json kernel_to_json(const Kernel& kernel) {
  json j;
  j["space"]["labels"] = kernel.space.labels;
  if (kernel.space.metric) j["space"]["metric"] = *kernel.space.metric;

  auto config_to_json = [&](const Config& cfg) {
    json arr = json::array();
    for (const auto& [site, count] : cfg.entries)
      arr.push_back({kernel.space.labels[site], count});
    if (cfg.outside > 0) arr.push_back({"@out", cfg.outside});
    return arr;
  };

  j["laws"] = json::array();
  for (const auto& law : kernel.laws) {
    json entry;
    if (const auto* ex = std::get_if<ExplicitLaw>(&law)) {
      entry["type"] = "explicit";
      entry["support"] = json::array();
      for (const auto& [cfg, p] : ex->support)
        entry["support"].push_back({{"config", config_to_json(cfg)}, {"p", p}});
    } else if (const auto* mn = std::get_if<MultinomialLaw>(&law)) {
      entry["type"] = "multinomial";
      entry["total_pmf"] = json::array();
      for (const auto& [count, p] : mn->total_pmf)
        entry["total_pmf"].push_back({count, p});
      json row = mn->dispersal;
      if (mn->dispersal_outside != 0.0) row.push_back(mn->dispersal_outside);
      entry["dispersal"] = row;
    } else {
      const auto& geo = std::get<GeometricLaw>(law);
      entry["type"] = "geometric";
      entry["mean"] = geo.mean;
      json row = geo.dispersal;
      if (geo.dispersal_outside != 0.0) row.push_back(geo.dispersal_outside);
      entry["dispersal"] = row;
    }
    j["laws"].push_back(std::move(entry));
  }
  j["boundary"] = kernel.boundary == BoundaryPolicy::kKill ? "kill"
                                                           : "survive_outside";
  return j;
}

void save_kernel(const Kernel& kernel, const std::string& path) {
  write_file(path, kernel_to_json(kernel).dump(2) + "\n");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("BadKernelFile", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("BadKernelFile", "cannot write '" + path + "'");
  out << bytes;
}

std::string content_digest(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void JsonWriter::separator() {
  if (pending_key_) {
    pending_key_ = false;
    return;
  }
  if (!needs_comma_.empty()) {
    if (needs_comma_.back()) out_ += ',';
    needs_comma_.back() = true;
  }
}

JsonWriter& JsonWriter::begin_object() {
  separator();
  out_ += '{';
  needs_comma_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_ += '}';
  needs_comma_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  separator();
  out_ += '[';
  needs_comma_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_ += ']';
  needs_comma_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  separator();
  out_ += '"';
  out_ += name;
  out_ += "\":";
  pending_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  separator();
  out_ += format_double(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
  separator();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  separator();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  separator();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  separator();
  out_ += '"';
  for (char c : v) {
    switch (c) {
      case '"': out_ += "\\\""; break;
      case '\\': out_ += "\\\\"; break;
      case '\n': out_ += "\\n"; break;
      case '\t': out_ += "\\t"; break;
      case '\r': out_ += "\\r"; break;
      default: out_ += c;
    }
  }
  out_ += '"';
  return *this;
}

JsonWriter& JsonWriter::null() {
  separator();
  out_ += "null";
  return *this;
}

JsonWriter& JsonWriter::values(const std::vector<double>& v) {
  begin_array();
  for (double x : v) value(x);
  return end_array();
}

}  // namespace branchlab
