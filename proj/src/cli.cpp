#include "branchlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "branchlab/acceptance.hpp"
#include "branchlab/core.hpp"
#include "branchlab/gallery.hpp"
#include "branchlab/genfun.hpp"
#include "branchlab/json_io.hpp"
#include "branchlab/orders.hpp"
#include "branchlab/pairgen.hpp"
#include "branchlab/sim.hpp"

namespace branchlab::cli {

namespace {

struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::string kernel_hash;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  std::string path = "branchlab.manifest.json";
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  void param(const std::string& key, const std::string& value) {
    parameters.emplace_back(key, value);
  }
  template <typename T>
  void param_num(const std::string& key, T value) {
    parameters.emplace_back(key, format_double(static_cast<double>(value)));
  }

  void write() const {
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    JsonWriter w;
    w.begin_object();
    w.key("command").value(command);
    w.key("parameters").begin_object();
    for (const auto& [k, v] : parameters) w.key(k).value(v);
    w.end_object();
    w.key("kernel_hash").value(kernel_hash);
    if (seed)
      w.key("seed").value(*seed);
    else
      w.key("seed").null();
    w.key("outputs").begin_array();
    for (const auto& o : outputs) w.value(o);
    w.end_array();
    w.key("wall_time_ms").value(ms);
    w.end_object();
    write_file(path, w.str() + "\n");
  }
};

Kernel load_checked(const std::string& path, bool renormalize,
                    Manifest& manifest) {
  std::vector<std::string> notes;
  Kernel kernel = load_kernel(path, renormalize, &notes);
  for (const auto& note : notes) std::cerr << "note: " << note << "\n";
  manifest.kernel_hash = content_digest(read_file(path));
  ValidationReport report = validate(kernel);
  if (!report.ok) {
    for (const auto& issue : report.issues)
      if (issue.severity == Severity::kError)
        std::cerr << "error: " << issue.message << "\n";
    fail("BadKernelFile", "kernel '" + path + "' failed validation");
  }
  return kernel;
}

void emit(const std::string& json, const std::optional<std::string>& out,
          Manifest& manifest) {
  std::cout << json << "\n";
  if (out) {
    write_file(*out, json + "\n");
    manifest.outputs.push_back(*out);
  }
}

void write_vector_csv(const std::string& path, const SiteSpace& space,
                      const ProbVector& v, Manifest& manifest) {
  std::string csv = "label,value\n";
  for (std::size_t i = 0; i < v.size(); ++i)
    csv += space.labels[i] + "," + format_double(v[i]) + "\n";
  write_file(path, csv);
  manifest.outputs.push_back(path);
}

ProbVector parse_z(const Kernel& kernel, const std::string& z_list,
                   double z_const, bool has_const) {
  if (has_const) return ProbVector::constant(kernel.size(), z_const);
  std::vector<double> values;
  std::stringstream ss(z_list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    values.push_back(std::stod(token));
  }
  if (values.size() != kernel.size())
    fail("DimensionMismatch", "--z needs exactly " +
                                  std::to_string(kernel.size()) + " entries");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) fail("OutOfRange", "z entries live in [0,1]");
  return ProbVector(std::move(values));
}

Config parse_init(const Kernel& kernel, const std::string& spec) {
  std::vector<std::pair<SiteIndex, std::uint32_t>> pairs;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    auto colon = token.rfind(':');
    std::string label = colon == std::string::npos ? token
                                                   : token.substr(0, colon);
    std::uint32_t count =
        colon == std::string::npos
            ? 1u
            : static_cast<std::uint32_t>(std::stoul(token.substr(colon + 1)));
    auto idx = kernel.space.index_of(label);
    if (!idx) fail("OutOfRange", "unknown site label '" + label + "'");
    pairs.emplace_back(*idx, count);
  }
  if (pairs.empty()) fail("OutOfRange", "empty initial configuration");
  return Config::from_pairs(std::move(pairs));
}

void write_iteration_json(JsonWriter& w, const Kernel& kernel,
                          const IterationResult& result) {
  w.key("labels").begin_array();
  for (const auto& l : kernel.space.labels) w.value(l);
  w.end_array();
  w.key("vector").values(result.vector.values());
  w.key("iterations").value(result.iterations);
  w.key("residual").value(result.residual);
  w.key("converged").value(result.converged);
  const char* direction = result.direction == MonotoneDirection::kUp ? "up"
                          : result.direction == MonotoneDirection::kDown
                              ? "down"
                              : "none";
  w.key("direction").value(direction);
}

void write_verdict_json(JsonWriter& w, const Kernel& kernel,
                        const OrderVerdict& verdict) {
  w.key("relation").value(to_string(verdict.relation));
  w.key("delta").value(verdict.delta);
  w.key("status").value(to_string(verdict.status));
  if (verdict.witness) {
    const OrderWitness& wit = *verdict.witness;
    w.key("witness").begin_object();
    if (!wit.z.empty()) w.key("z").values(wit.z);
    w.key("site").value(kernel.space.labels[wit.site]);
    w.key("gap").value(wit.gap);
    if (!wit.upper_set_generators.empty()) {
      w.key("upper_set_generators").begin_array();
      for (const Config& c : wit.upper_set_generators)
        w.value(c.describe(kernel.space));
      w.end_array();
      w.key("mu_mass").value(wit.mu_mass);
      w.key("nu_mass").value(wit.nu_mass);
    }
    w.end_object();
  } else {
    w.key("witness").null();
  }
  w.key("margin").value(verdict.margin);
}

int verdict_exit(const OrderVerdict& verdict) {
  switch (verdict.status) {
    case OrderStatus::kCertified: return 0;
    case OrderStatus::kFalsified: return 1;
    default: return 2;
  }
}

struct TrajectoryCsvOptions {
  std::optional<SiteIndex> origin;
};

void write_trajectory_csv(const std::string& path, const Kernel& kernel,
                          const Trajectory& trajectory,
                          const TrajectoryCsvOptions& options,
                          Manifest& manifest) {
  std::optional<DisplacementSeries> displacement;
  if (options.origin && kernel.space.metric)
    displacement = displacement_stats(kernel.space, trajectory, *options.origin);
  std::string csv = "generation,total,occupied_sites,M,m\n";
  for (std::size_t n = 0; n < trajectory.generations.size(); ++n) {
    const Config& gen = trajectory.generations[n];
    double big = displacement ? displacement->max_displacement[n] : 0.0;
    double small = displacement ? displacement->min_displacement[n] : 0.0;
    csv += std::to_string(n) + "," + std::to_string(gen.total()) + "," +
           std::to_string(gen.entries.size()) + "," + format_double(big) +
           "," + format_double(small) + "\n";
  }
  write_file(path, csv);
  manifest.outputs.push_back(path);
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"branchlab: multitype branching processes on finite "
               "truncations — generating functions, extinction fixed points, "
               "reproduction-law orders, seeded simulation"};
  app.require_subcommand(1);

  // common options, re-bound per subcommand
  std::string kernel_path, kernel_a, kernel_b;
  std::string out_path, csv_path, manifest_path = "branchlab.manifest.json";
  bool renormalize = false;
  double tol = 1e-12;
  std::size_t max_iter = 100000;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* cmd, bool needs_kernel) {
    if (needs_kernel)
      cmd->add_option("-k,--kernel", kernel_path, "kernel JSON file")
          ->required();
    cmd->add_option("-o,--out", out_path, "write the result JSON here too");
    cmd->add_option("--manifest", manifest_path, "manifest path");
    cmd->add_flag("--renormalize", renormalize,
                  "renormalize slightly-off probability masses on ingestion");
  };

  // validate
  auto* c_validate = app.add_subcommand("validate", "check a kernel file");
  add_common(c_validate, true);

  // genfun eval | phi
  auto* c_genfun = app.add_subcommand("genfun", "generating function");
  c_genfun->require_subcommand(1);
  auto* c_eval = c_genfun->add_subcommand("eval", "evaluate G(z)");
  std::string z_list;
  double z_const = 1.0;
  add_common(c_eval, true);
  auto* zopt = c_eval->add_option("--z", z_list, "comma-separated z vector");
  auto* zconst = c_eval->add_option("--z-const", z_const, "constant z");
  zopt->excludes(zconst);
  auto* c_phi = c_genfun->add_subcommand("phi", "evaluate phi_x(t)");
  std::string site_label;
  double t_value = 0.5;
  add_common(c_phi, true);
  c_phi->add_option("--site", site_label, "site label")->required();
  c_phi->add_option("--t", t_value, "argument in [0,1]")->required();

  // fixpoint global | local
  auto* c_fix = app.add_subcommand("fixpoint", "extinction fixed points");
  c_fix->require_subcommand(1);
  auto* c_global = c_fix->add_subcommand("global", "q(X) from G-iteration");
  add_common(c_global, true);
  c_global->add_option("--tol", tol, "sup-norm step tolerance");
  c_global->add_option("--max-iter", max_iter, "iteration budget");
  c_global->add_option("--csv", csv_path, "also export label,value CSV");
  auto* c_local = c_fix->add_subcommand("local", "q(A) via avoidance vector");
  std::string set_spec;
  std::size_t k_max = 100000;
  std::uint32_t crosscheck = 0;
  add_common(c_local, true);
  c_local->add_option("--set", set_spec, "comma-separated site labels or 'all'")
      ->required();
  c_local->add_option("--tol", tol, "sup-norm step tolerance");
  c_local->add_option("--k-max", k_max, "iteration budget");
  c_local->add_option("--crosscheck", crosscheck,
                      "also run the space-time route to this depth");
  c_local->add_option("--csv", csv_path, "also export label,value CSV");

  // check-delta
  auto* c_delta = app.add_subcommand("check-delta",
                                     "test G^(n)(delta 1) <= delta 1");
  double delta = 0.5;
  std::size_t n_max = 100;
  add_common(c_delta, true);
  c_delta->add_option("--delta", delta, "delta in [0,1)")->required();
  c_delta->add_option("--n-max", n_max, "largest iterate to try");

  // order germ | pgf | stochastic | chain | theorem
  auto* c_order = app.add_subcommand("order", "reproduction-law orders");
  c_order->require_subcommand(1);
  double spacing = 1.0 / 64.0;
  std::size_t grid = 65;
  auto add_pair = [&](CLI::App* cmd) {
    cmd->add_option("-a,--mu", kernel_a, "dominating kernel (mu)")->required();
    cmd->add_option("-b,--nu", kernel_b, "dominated kernel (nu)")->required();
    cmd->add_option("-o,--out", out_path, "write the result JSON here too");
    cmd->add_option("--manifest", manifest_path, "manifest path");
    cmd->add_flag("--renormalize", renormalize, "renormalize on ingestion");
  };
  auto* c_germ = c_order->add_subcommand("germ", "germ order on [delta,1]^X");
  add_pair(c_germ);
  c_germ->add_option("--delta", delta, "germ box corner")->required();
  c_germ->add_option("--grid", grid, "scalar grid points (multinomial path)");
  c_germ->add_option("--spacing", spacing, "grid spacing (generic path)");
  auto* c_pgf = c_order->add_subcommand("pgf", "pgf order on [0,1]^X");
  add_pair(c_pgf);
  c_pgf->add_option("--spacing", spacing, "grid spacing");
  auto* c_stoch = c_order->add_subcommand("stochastic",
                                          "coupling feasibility per site");
  add_pair(c_stoch);
  auto* c_chain = c_order->add_subcommand(
      "chain", "stochastic => pgf => germ consistency");
  std::size_t random_pairs = 0;
  std::size_t chain_sites = 3;
  c_chain->add_option("-a,--mu", kernel_a, "dominating kernel (mu)");
  c_chain->add_option("-b,--nu", kernel_b, "dominated kernel (nu)");
  c_chain->add_option("--random", random_pairs,
                      "run on this many generated dominated pairs instead");
  c_chain->add_option("--sites", chain_sites, "sites per generated kernel");
  c_chain->add_option("--seed", seed, "master seed");
  c_chain->add_option("-o,--out", out_path, "write the result JSON here too");
  c_chain->add_option("--manifest", manifest_path, "manifest path");
  auto* c_theorem = c_order->add_subcommand(
      "theorem", "extinction-vector inequality under a certified order");
  add_pair(c_theorem);
  double theorem_tol = 1e-8;
  c_theorem->add_option("--delta", delta, "germ delta")->required();
  c_theorem->add_option("--set", set_spec, "site set A")->required();
  c_theorem->add_option("--tol", theorem_tol, "inequality slack");

  // simulate run | mc | martingale | displacement | growth
  auto* c_sim = app.add_subcommand("simulate", "seeded Monte Carlo");
  c_sim->require_subcommand(1);
  std::string init_spec = "";
  std::size_t horizon = 50;
  std::uint64_t pop_cap = 100000;
  std::size_t replicas = 10000;
  std::size_t margin = 10;
  std::string x0_label;
  std::string samples_path;
  double floor = 1e-6;
  std::size_t mart_k = 1;

  auto* c_run = c_sim->add_subcommand("run", "one trajectory");
  add_common(c_run, true);
  c_run->add_option("--init", init_spec, "initial config, e.g. 'a:1,b:2'")
      ->required();
  c_run->add_option("--horizon", horizon, "generation budget");
  c_run->add_option("--pop-cap", pop_cap, "population cap");
  c_run->add_option("--seed", seed, "master seed");
  c_run->add_option("--csv", csv_path, "per-generation CSV");
  c_run->add_option("--x0", x0_label, "origin for displacement columns");

  auto* c_mc = c_sim->add_subcommand("mc", "extinction-probability estimate");
  add_common(c_mc, true);
  c_mc->add_option("--site", site_label, "start site")->required();
  c_mc->add_option("--set", set_spec, "target set A")->required();
  c_mc->add_option("--replicas", replicas, "replica count");
  c_mc->add_option("--horizon", horizon, "generation budget");
  c_mc->add_option("--pop-cap", pop_cap, "survival threshold");
  c_mc->add_option("--margin", margin, "last-visit margin");
  c_mc->add_option("--seed", seed, "master seed");

  auto* c_mart = c_sim->add_subcommand("martingale",
                                       "E[z^eta_k] against (G^k z)^eta_0");
  add_common(c_mart, true);
  c_mart->add_option("--init", init_spec, "initial config")->required();
  auto* mart_z = c_mart->add_option("--z", z_list, "comma-separated z");
  auto* mart_zc = c_mart->add_option("--z-const", z_const, "constant z");
  mart_z->excludes(mart_zc);
  c_mart->add_option("--steps", mart_k, "martingale steps k");
  c_mart->add_option("--replicas", replicas, "replica count");
  c_mart->add_option("--seed", seed, "master seed");
  c_mart->add_option("--samples-out", samples_path, "dump W samples (JSON)");

  auto* c_disp = c_sim->add_subcommand("displacement",
                                       "extreme displacements per generation");
  add_common(c_disp, true);
  c_disp->add_option("--init", init_spec, "initial config")->required();
  c_disp->add_option("--x0", x0_label, "origin site")->required();
  c_disp->add_option("--horizon", horizon, "generation budget");
  c_disp->add_option("--pop-cap", pop_cap, "population cap");
  c_disp->add_option("--seed", seed, "master seed");
  c_disp->add_option("--csv", csv_path, "per-generation CSV");

  auto* c_growth = c_sim->add_subcommand("growth",
                                         "population blow-up on survival");
  add_common(c_growth, true);
  c_growth->add_option("--site", site_label, "start site")->required();
  c_growth->add_option("--set", set_spec, "target set A")->required();
  c_growth->add_option("--replicas", replicas, "replica count");
  c_growth->add_option("--horizon", horizon, "generation budget");
  c_growth->add_option("--pop-cap", pop_cap, "population cap");
  c_growth->add_option("--seed", seed, "master seed");
  c_growth->add_option("--floor", floor, "precondition floor for inf q(A)");

  // example
  auto* c_example = app.add_subcommand("example", "write a gallery kernel");
  std::string example_name;
  std::string oracle_path;
  std::size_t truncation = 40;
  double c_param = 0.6931471805599453;
  double theta = 0.5;
  std::string boundary_name = "survive_outside";
  c_example->add_option("name", example_name, "moyal1|moyal2|geometric|"
                                              "incomparable-mu|incomparable-nu")
      ->required();
  c_example->add_option("-o,--out", out_path, "kernel JSON path")->required();
  c_example->add_option("--oracle", oracle_path, "oracle JSON side file");
  c_example->add_option("--n", truncation, "truncation size");
  c_example->add_option("--c", c_param, "exp2 parameter c");
  c_example->add_option("--theta", theta, "moyal2 left-step fraction");
  c_example->add_option("--boundary", boundary_name, "kill|survive_outside");
  std::string means_list = "2.0";
  c_example->add_option("--means", means_list, "geometric means (comma list)");
  c_example->add_option("--manifest", manifest_path, "manifest path");

  // report
  auto* c_report = app.add_subcommand("report", "full acceptance sweep");
  bool fast = false;
  c_report->add_flag("--fast", fast, "smaller Monte Carlo runs");
  c_report->add_option("-o,--out", out_path, "summary JSON path");
  c_report->add_option("--manifest", manifest_path, "manifest path");

  std::vector<const char*> argv;
  argv.push_back("branchlab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()),
              const_cast<char**>(argv.data()));
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  Manifest manifest;
  manifest.path = manifest_path;
  std::optional<std::string> out =
      out_path.empty() ? std::nullopt : std::optional<std::string>(out_path);

  try {
    if (*c_validate) {
      manifest.command = "validate";
      manifest.param("kernel", kernel_path);
      std::vector<std::string> notes;
      Kernel kernel = load_kernel(kernel_path, renormalize, &notes);
      manifest.kernel_hash = content_digest(read_file(kernel_path));
      ValidationReport report = validate(kernel);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("validate");
      w.key("ok").value(report.ok);
      w.key("triviality_flag").value(report.triviality_flag);
      w.key("issues").begin_array();
      for (const auto& issue : report.issues) {
        w.begin_object();
        const char* sev = issue.severity == Severity::kError     ? "error"
                          : issue.severity == Severity::kWarning ? "warning"
                                                                 : "info";
        w.key("severity").value(sev);
        if (issue.site)
          w.key("site").value(kernel.space.labels[*issue.site]);
        else
          w.key("site").null();
        w.key("message").value(issue.message);
        w.end_object();
      }
      w.end_array();
      for (const auto& note : notes) (void)note;
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return report.ok ? 0 : 1;
    }

    if (*c_eval) {
      manifest.command = "genfun-eval";
      manifest.param("kernel", kernel_path);
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      ProbVector z = parse_z(kernel, z_list, z_const, zconst->count() > 0);
      ProbVector g = eval_G(kernel, z);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("genfun-eval");
      w.key("labels").begin_array();
      for (const auto& l : kernel.space.labels) w.value(l);
      w.end_array();
      w.key("z").values(z.values());
      w.key("vector").values(g.values());
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return 0;
    }

    if (*c_phi) {
      manifest.command = "genfun-phi";
      manifest.param("kernel", kernel_path);
      manifest.param("site", site_label);
      manifest.param_num("t", t_value);
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      auto idx = kernel.space.index_of(site_label);
      if (!idx) fail("OutOfRange", "unknown site '" + site_label + "'");
      double value = eval_phi(kernel, *idx, t_value);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("genfun-phi");
      w.key("site").value(site_label);
      w.key("t").value(t_value);
      w.key("value").value(value);
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return 0;
    }

    if (*c_global) {
      manifest.command = "fixpoint-global";
      manifest.param("kernel", kernel_path);
      manifest.param_num("tol", tol);
      manifest.param_num("max_iter", max_iter);
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      IterationResult result = q_global(kernel, tol, max_iter);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("fixpoint-global");
      write_iteration_json(w, kernel, result);
      w.end_object();
      emit(w.str(), out, manifest);
      if (!csv_path.empty())
        write_vector_csv(csv_path, kernel.space, result.vector, manifest);
      manifest.write();
      return result.converged ? 0 : 1;
    }

    if (*c_local) {
      manifest.command = "fixpoint-local";
      manifest.param("kernel", kernel_path);
      manifest.param("set", set_spec);
      manifest.param_num("tol", tol);
      manifest.param_num("k_max", k_max);
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      SiteSet sites = parse_site_set(kernel, set_spec);
      LocalExtinctionResult result = q_local(kernel, sites, k_max, tol);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("fixpoint-local");
      w.key("labels").begin_array();
      for (const auto& l : kernel.space.labels) w.value(l);
      w.end_array();
      w.key("vector").values(result.q_local.values());
      w.key("iterations").value(result.k_used);
      w.key("residual").value(residual(kernel, result.q_local));
      w.key("converged").value(result.converged);
      w.key("direction").value("up");
      w.key("h").values(result.h.values());
      w.key("bracket_lower").values(result.bracket_lower.values());
      w.key("bracket_upper").values(result.bracket_upper.values());
      if (crosscheck > 0) {
        ProbVector st = q_local_space_time(kernel, sites, crosscheck, tol);
        w.key("space_time_route").values(st.values());
        w.key("route_agreement").value(result.q_local.sup_dist(st));
      }
      w.end_object();
      emit(w.str(), out, manifest);
      if (!csv_path.empty())
        write_vector_csv(csv_path, kernel.space, result.q_local, manifest);
      manifest.write();
      return result.converged ? 0 : 1;
    }

    if (*c_delta) {
      manifest.command = "check-delta";
      manifest.param("kernel", kernel_path);
      manifest.param_num("delta", delta);
      manifest.param_num("n_max", n_max);
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      DeltaConditionResult result = check_delta_condition(kernel, delta, n_max);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("check-delta");
      w.key("delta").value(delta);
      w.key("holds").value(result.holds);
      w.key("n").value(result.n);
      if (result.holds)
        w.key("sup_q_bound").value(result.sup_q_bound);
      else
        w.key("sup_q_bound").null();
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return result.holds ? 0 : 2;
    }

    auto load_pair = [&](Kernel& mu, Kernel& nu) {
      std::vector<std::string> notes;
      mu = load_kernel(kernel_a, renormalize, &notes);
      nu = load_kernel(kernel_b, renormalize, &notes);
      manifest.kernel_hash = content_digest(read_file(kernel_a)) + "+" +
                             content_digest(read_file(kernel_b));
      if (!validate(mu).ok || !validate(nu).ok)
        fail("BadKernelFile", "kernel pair failed validation");
    };

    if (*c_germ || *c_pgf) {
      bool is_germ = static_cast<bool>(*c_germ);
      manifest.command = is_germ ? "order-germ" : "order-pgf";
      manifest.param("mu", kernel_a);
      manifest.param("nu", kernel_b);
      Kernel mu, nu;
      load_pair(mu, nu);
      double use_delta = is_germ ? delta : 0.0;
      manifest.param_num("delta", use_delta);
      OrderVerdict verdict;
      bool multinomial_family = true;
      for (const Kernel* k : {&mu, &nu})
        for (const auto& law : k->laws)
          multinomial_family =
              multinomial_family && !std::holds_alternative<ExplicitLaw>(law);
      auto check_at = [&](double d) {
        return is_germ && multinomial_family
                   ? germ_check_multinomial(mu, nu, d, grid)
                   : order_check_grid(mu, nu, d, spacing);
      };
      verdict = check_at(use_delta);
      // The germ order only asks for SOME delta < 1: when the requested box
      // fails, walk a dyadic ladder toward 1 and report the smallest corner
      // that certifies.
      std::optional<double> smallest_certified;
      if (is_germ && verdict.status != OrderStatus::kCertified) {
        for (int j = 1; j <= 10; ++j) {
          double d = 1.0 - (1.0 - use_delta) / std::pow(2.0, j);
          if (check_at(d).status == OrderStatus::kCertified) {
            smallest_certified = d;
            break;
          }
        }
      }
      JsonWriter w;
      w.begin_object();
      w.key("command").value(manifest.command);
      write_verdict_json(w, mu, verdict);
      if (is_germ) {
        if (smallest_certified)
          w.key("smallest_certified_delta").value(*smallest_certified);
        else if (verdict.status == OrderStatus::kCertified)
          w.key("smallest_certified_delta").value(use_delta);
        else
          w.key("smallest_certified_delta").null();
      }
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return verdict_exit(verdict);
    }

    if (*c_stoch) {
      manifest.command = "order-stochastic";
      manifest.param("mu", kernel_a);
      manifest.param("nu", kernel_b);
      Kernel mu, nu;
      load_pair(mu, nu);
      KernelStochasticResult result = stochastic_order_check_kernels(mu, nu);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("order-stochastic");
      write_verdict_json(w, mu, result.verdict);
      w.key("per_site").begin_array();
      for (std::size_t x = 0; x < result.per_site.size(); ++x) {
        const auto& site = result.per_site[x];
        w.begin_object();
        w.key("site").value(mu.space.labels[x]);
        w.key("status").value(to_string(site.verdict.status));
        if (site.certificate) {
          w.key("coupling_pairs").value(site.certificate->joint.size());
          w.key("mu_marginal_residual")
              .value(site.certificate->mu_marginal_residual);
          w.key("nu_marginal_residual")
              .value(site.certificate->nu_marginal_residual);
        }
        w.end_object();
      }
      w.end_array();
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return verdict_exit(result.verdict);
    }

    if (*c_chain) {
      manifest.command = "order-chain";
      manifest.seed = seed;
      JsonWriter w;
      w.begin_object();
      w.key("command").value("order-chain");
      bool all_consistent = true;
      w.key("pairs").begin_array();
      auto one_pair = [&](const Kernel& mu, const Kernel& nu,
                          std::uint64_t s) {
        ChainReport report = order_chain_test(mu, nu, s);
        all_consistent = all_consistent && report.consistent;
        w.begin_object();
        w.key("stochastic").value(to_string(report.stochastic.status));
        w.key("pgf").value(to_string(report.pgf.status));
        w.key("germ").begin_array();
        for (const auto& g : report.germ) w.value(to_string(g.status));
        w.end_array();
        w.key("violations").begin_array();
        for (const auto& v : report.violations) w.value(v);
        w.end_array();
        w.end_object();
      };
      if (random_pairs > 0) {
        manifest.param_num("random", random_pairs);
        PairGenOptions options;
        options.n_sites = chain_sites;
        for (std::size_t i = 0; i < random_pairs; ++i) {
          auto [mu, nu] = random_dominated_explicit_pair(seed + i, options);
          one_pair(mu, nu, seed + i);
        }
      } else {
        if (kernel_a.empty() || kernel_b.empty())
          fail("OutOfRange", "order chain needs -a/-b or --random");
        manifest.param("mu", kernel_a);
        manifest.param("nu", kernel_b);
        Kernel mu, nu;
        load_pair(mu, nu);
        one_pair(mu, nu, seed);
      }
      w.end_array();
      w.key("consistent").value(all_consistent);
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return all_consistent ? 0 : 1;
    }

    if (*c_theorem) {
      manifest.command = "order-theorem";
      manifest.param("mu", kernel_a);
      manifest.param("nu", kernel_b);
      manifest.param_num("delta", delta);
      manifest.param("set", set_spec);
      Kernel mu, nu;
      load_pair(mu, nu);
      SiteSet sites = parse_site_set(mu, set_spec);
      TheoremReport report =
          theorem_inequality_check(mu, nu, delta, sites, theorem_tol);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("order-theorem");
      w.key("order_status").value(to_string(report.order.status));
      w.key("delta").value(delta);
      w.key("q_mu").values(report.q_mu.values());
      w.key("q_nu").values(report.q_nu.values());
      w.key("max_violation").value(report.max_violation);
      w.key("holds").value(report.holds);
      w.key("sup_q_nu_below_one").value(report.sup_q_nu_below_one);
      w.key("nu_strong_survival").value(report.nu_strong_survival);
      w.key("mu_strong_survival").value(report.mu_strong_survival);
      w.key("strong_survival_transfer_ok")
          .value(report.strong_survival_transfer_ok);
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return report.holds && report.strong_survival_transfer_ok ? 0 : 1;
    }

    if (*c_run) {
      manifest.command = "simulate-run";
      manifest.param("kernel", kernel_path);
      manifest.param("init", init_spec);
      manifest.param_num("horizon", horizon);
      manifest.param_num("pop_cap", pop_cap);
      manifest.seed = seed;
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      Config init = parse_init(kernel, init_spec);
      Trajectory trajectory = run(kernel, init, horizon, pop_cap, seed);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("simulate-run");
      w.key("master_seed").value(seed);
      w.key("generations").value(trajectory.generations.size());
      w.key("stopped_reason").value(to_string(trajectory.stopped_reason));
      w.key("final_total").value(trajectory.generations.back().total());
      w.key("outside_survivors").value(trajectory.outside_survivors);
      w.key("population").begin_array();
      for (const Config& gen : trajectory.generations) w.value(gen.total());
      w.end_array();
      w.end_object();
      emit(w.str(), out, manifest);
      if (!csv_path.empty()) {
        TrajectoryCsvOptions options;
        if (!x0_label.empty()) {
          auto idx = kernel.space.index_of(x0_label);
          if (!idx) fail("OutOfRange", "unknown site '" + x0_label + "'");
          options.origin = *idx;
        } else if (kernel.space.metric && !init.entries.empty()) {
          options.origin = init.entries.front().first;
        }
        write_trajectory_csv(csv_path, kernel, trajectory, options, manifest);
      }
      manifest.write();
      return 0;
    }

    if (*c_mc) {
      manifest.command = "simulate-mc";
      manifest.param("kernel", kernel_path);
      manifest.param("site", site_label);
      manifest.param("set", set_spec);
      manifest.param_num("replicas", replicas);
      manifest.param_num("horizon", horizon);
      manifest.param_num("pop_cap", pop_cap);
      manifest.param_num("margin", margin);
      manifest.seed = seed;
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      auto idx = kernel.space.index_of(site_label);
      if (!idx) fail("OutOfRange", "unknown site '" + site_label + "'");
      SiteSet sites = parse_site_set(kernel, set_spec);
      McEstimate estimate = mc_extinction(kernel, *idx, sites, replicas,
                                          horizon, pop_cap, margin, seed);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("simulate-mc");
      w.key("master_seed").value(seed);
      w.key("point").value(estimate.point);
      w.key("std_error").value(estimate.std_error);
      w.key("replicas").value(estimate.replicas);
      w.key("extinct_in_a").value(estimate.extinct_in_a);
      w.key("surviving_in_a").value(estimate.surviving_in_a);
      w.key("undecided").value(estimate.undecided);
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return 0;
    }

    if (*c_mart) {
      manifest.command = "simulate-martingale";
      manifest.param("kernel", kernel_path);
      manifest.param("init", init_spec);
      manifest.param_num("k", mart_k);
      manifest.param_num("replicas", replicas);
      manifest.seed = seed;
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      Config init = parse_init(kernel, init_spec);
      ProbVector z = parse_z(kernel, z_list, z_const, mart_zc->count() > 0);
      MartingaleReport report =
          martingale_test(kernel, init, z, mart_k, replicas, seed);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("simulate-martingale");
      w.key("master_seed").value(seed);
      w.key("z").values(z.values());
      w.key("k").value(report.k);
      w.key("replicas").value(replicas);
      w.key("empirical_mean").value(report.empirical_mean);
      w.key("predicted").value(report.predicted);
      w.key("z_score").value(report.z_score);
      w.end_object();
      emit(w.str(), out, manifest);
      if (!samples_path.empty()) {
        JsonWriter ws;
        ws.begin_object();
        ws.key("w_samples").values(report.w_samples);
        ws.end_object();
        write_file(samples_path, ws.str() + "\n");
        manifest.outputs.push_back(samples_path);
      }
      manifest.write();
      return 0;
    }

    if (*c_disp) {
      manifest.command = "simulate-displacement";
      manifest.param("kernel", kernel_path);
      manifest.param("init", init_spec);
      manifest.param("x0", x0_label);
      manifest.param_num("horizon", horizon);
      manifest.seed = seed;
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      Config init = parse_init(kernel, init_spec);
      auto idx = kernel.space.index_of(x0_label);
      if (!idx) fail("OutOfRange", "unknown site '" + x0_label + "'");
      Trajectory trajectory = run(kernel, init, horizon, pop_cap, seed);
      DisplacementSeries series =
          displacement_stats(kernel.space, trajectory, *idx);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("simulate-displacement");
      w.key("master_seed").value(seed);
      w.key("stopped_reason").value(to_string(trajectory.stopped_reason));
      w.key("M").values(series.max_displacement);
      w.key("m").values(series.min_displacement);
      w.end_object();
      emit(w.str(), out, manifest);
      if (!csv_path.empty()) {
        TrajectoryCsvOptions options;
        options.origin = *idx;
        write_trajectory_csv(csv_path, kernel, trajectory, options, manifest);
      }
      manifest.write();
      return 0;
    }

    if (*c_growth) {
      manifest.command = "simulate-growth";
      manifest.param("kernel", kernel_path);
      manifest.param("site", site_label);
      manifest.param("set", set_spec);
      manifest.param_num("replicas", replicas);
      manifest.param_num("horizon", horizon);
      manifest.seed = seed;
      Kernel kernel = load_checked(kernel_path, renormalize, manifest);
      auto idx = kernel.space.index_of(site_label);
      if (!idx) fail("OutOfRange", "unknown site '" + site_label + "'");
      SiteSet sites = parse_site_set(kernel, set_spec);
      GrowthReport report = growth_test(kernel, *idx, sites, replicas, horizon,
                                        pop_cap, seed, floor);
      JsonWriter w;
      w.begin_object();
      w.key("command").value("simulate-growth");
      w.key("master_seed").value(seed);
      w.key("min_q_local").value(report.min_q_local);
      w.key("replicas").value(report.replicas);
      w.key("surviving").value(report.surviving);
      w.key("thresholds").begin_array();
      for (std::uint64_t t : report.thresholds) w.value(t);
      w.end_array();
      w.key("fractions").values(report.fractions);
      w.end_object();
      emit(w.str(), out, manifest);
      manifest.write();
      return 0;
    }

    if (*c_example) {
      manifest.command = "example";
      manifest.param("name", example_name);
      BoundaryPolicy boundary = boundary_name == "kill"
                                    ? BoundaryPolicy::kKill
                                    : BoundaryPolicy::kSurviveOutside;
      gallery::ExampleBundle bundle;
      if (example_name == "moyal1")
        bundle = gallery::moyal1(gallery::PSpec::exp2(c_param), truncation,
                                 boundary);
      else if (example_name == "moyal2")
        bundle = gallery::moyal2(gallery::PSpec::exp2(c_param),
                                 gallery::RSpec::scaled_gap(theta), truncation,
                                 boundary);
      else if (example_name == "geometric") {
        std::vector<double> means;
        std::stringstream ss(means_list);
        std::string token;
        while (std::getline(ss, token, ','))
          if (!token.empty()) means.push_back(std::stod(token));
        std::vector<std::vector<double>> dispersal(
            means.size(), std::vector<double>(means.size(), 0.0));
        for (std::size_t i = 0; i < means.size(); ++i)
          dispersal[i][i] = 1.0;  // diagonal by default
        bundle = gallery::geometric_kernel(means, dispersal);
      } else {
        bundle = gallery::bundle_by_name(example_name);
      }
      save_kernel(bundle.kernel, out_path);
      manifest.outputs.push_back(out_path);
      manifest.kernel_hash = content_digest(read_file(out_path));
      if (!oracle_path.empty()) {
        JsonWriter w;
        w.begin_object();
        w.key("name").value(bundle.name);
        w.key("note").value(bundle.note);
        w.key("oracles").begin_object();
        for (const auto& [name, oracle] : bundle.oracles) {
          w.key(name).begin_object();
          w.key("values").values(oracle.values);
          w.key("provenance").value(oracle.provenance);
          w.end_object();
        }
        w.end_object();
        w.end_object();
        write_file(oracle_path, w.str() + "\n");
        manifest.outputs.push_back(oracle_path);
      }
      JsonWriter w;
      w.begin_object();
      w.key("command").value("example");
      w.key("name").value(example_name);
      w.key("outputs").begin_array();
      for (const auto& o : manifest.outputs) w.value(o);
      w.end_array();
      w.end_object();
      std::cout << w.str() << "\n";
      manifest.write();
      return 0;
    }

    if (*c_report) {
      manifest.command = "report";
      auto results = acceptance::run_all(fast);
      bool ok = acceptance::print_report(results);
      if (!out_path.empty()) {
        JsonWriter w;
        w.begin_object();
        w.key("command").value("report");
        w.key("criteria").begin_array();
        for (const auto& r : results) {
          w.begin_object();
          w.key("id").value(std::int64_t(r.id));
          w.key("name").value(r.name);
          w.key("pass").value(r.pass);
          w.key("detail").value(r.detail);
          w.key("seconds").value(r.seconds);
          w.end_object();
        }
        w.end_array();
        w.key("all_pass").value(ok);
        w.end_object();
        write_file(out_path, w.str() + "\n");
        manifest.outputs.push_back(out_path);
      }
      manifest.write();
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    if (e.code() == "BadKernelFile") return 65;
    if (e.code() == "NotConverged" || e.code() == "OrderNotCertified" ||
        e.code() == "PreconditionUnverified")
      return 1;
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  }
  return 64;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace branchlab::cli
