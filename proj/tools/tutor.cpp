// tutor: simulate / compare / replay / serve / ingest
#include <CLI11.hpp>
#include <httplib.h>

#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "tutor/learner_features.h"
#include "tutor/net.h"
#include "tutor/scenarios.h"
#include "tutor/service.h"
#include "tutor/sim/simulation.h"

namespace {

using namespace tutor;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, "", path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

// One JSON file configures policy, renderer, templates and archetypes.
struct Settings {
  PolicyConfig policy;
  RendererConfig renderer;
  TemplateSet templates = TemplateSet::defaults();
  std::optional<nlohmann::json> archetypes;
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  const auto doc = read_json(path);
  s.policy = PolicyConfig::from_json(doc);
  if (doc.contains("renderer")) s.renderer = RendererConfig::from_json(doc.at("renderer"));
  if (doc.contains("templates")) s.templates = TemplateSet::from_json(doc.at("templates"));
  if (doc.contains("archetypes")) s.archetypes = doc.at("archetypes");
  return s;
}

std::shared_ptr<ChatClient> make_client(const RendererConfig& rc) {
  if (rc.mode != RendererMode::kLlm) return nullptr;
  std::string endpoint = process_env(rc.endpoint_env).value_or(rc.endpoint);
  if (endpoint.empty()) {
    std::cerr << "warning: no endpoint (" << rc.endpoint_env << " or renderer.endpoint); "
              << "every turn will use the template fallback\n";
    return nullptr;
  }
  return std::make_shared<HttpChatClient>(endpoint);
}

// Flags given on the command line win over the config file; absent ones don't.
int cmd_simulate(const std::string& policy, std::optional<std::size_t> runs,
                 std::optional<double> noise, std::optional<std::uint64_t> seed,
                 const std::string& out, const std::string& csv, const std::string& config_path,
                 unsigned threads) {
  sim::SimConfig cfg;
  if (!config_path.empty()) {
    const auto doc = read_json(config_path);
    cfg = sim::SimConfig::from_json(doc.contains("simulation") ? doc.at("simulation") : doc);
    const Settings s = load_settings(config_path);
    cfg.policy = s.policy;
    if (s.archetypes) {
      cfg.archetypes.clear();
      for (const auto& a : *s.archetypes) cfg.archetypes.push_back(sim::Archetype::from_json(a));
    }
  }
  if (runs) cfg.runs_per_archetype = *runs;
  if (noise) cfg.noise_sigma = *noise;
  if (seed) cfg.seed = *seed;
  cfg.threads = threads;
  if (policy == "both") cfg.policies = {PolicyKind::kEs, PolicyKind::kBaseline};
  else cfg.policies = {policy_from_string(policy)};
  if (cfg.runs_per_archetype < 1) throw ValidationError("runs", "--runs must be >= 1");
  if (cfg.noise_sigma < 0) throw ValidationError("noise", "--noise must be >= 0");

  const auto report = sim::run_monte_carlo(cfg);
  write_file(out, report.to_json().dump(2) + "\n");
  if (!csv.empty()) write_file(csv, sim::runs_to_csv(report));
  if (!report.tests.empty()) std::cout << sim::format_comparison(report.tests);
  std::cerr << "wrote " << report.runs.size() << " runs to " << out << "\n";
  return 0;
}

std::vector<sim::RunRecord> runs_of(const sim::SimulationReport& r, PolicyKind p) {
  std::vector<sim::RunRecord> out;
  for (const auto* run : r.runs_for(p)) out.push_back(*run);
  return out;
}

int cmd_compare(const std::string& es_path, const std::string& base_path, const std::string& csv) {
  const auto es_doc = nlohmann::ordered_json::parse(std::ifstream(es_path));
  const auto base_doc = nlohmann::ordered_json::parse(std::ifstream(base_path));
  const auto es = sim::SimulationReport::from_json(es_doc);
  const auto base = sim::SimulationReport::from_json(base_doc);
  const auto es_runs = runs_of(es, PolicyKind::kEs);
  const auto base_runs = runs_of(base, PolicyKind::kBaseline);
  if (es_runs.empty()) throw ValidationError("es", es_path + " has no es runs");
  if (base_runs.empty()) throw ValidationError("baseline", base_path + " has no baseline runs");

  const auto tests = sim::paired_tests(es_runs, base_runs);
  std::cout << sim::format_comparison(tests);
  auto ptrs = [](const std::vector<sim::RunRecord>& v) {
    std::vector<const sim::RunRecord*> p;
    for (const auto& r : v) p.push_back(&r);
    return p;
  };
  std::printf("\ncohort gain per hint: es %.3f  baseline %.3f\n",
              sim::cohort_hint_efficiency(ptrs(es_runs)), sim::cohort_hint_efficiency(ptrs(base_runs)));
  std::printf("mean per-run efficiency: es %.3f  baseline %.3f\n",
              sim::mean_run_hint_efficiency(ptrs(es_runs)), sim::mean_run_hint_efficiency(ptrs(base_runs)));

  if (!csv.empty()) {
    sim::SimulationReport merged;
    merged.runs = es_runs;
    merged.runs.insert(merged.runs.end(), base_runs.begin(), base_runs.end());
    write_file(csv, sim::runs_to_csv(merged));
  }
  return 0;
}

int cmd_replay(const std::string& scenario, const std::string& policy, const std::string& trace,
               const std::string& scenarios_path, const std::string& config_path) {
  const auto store = scenarios_path.empty() ? ScenarioStore::embedded() : ScenarioStore::load(scenarios_path);
  Settings s = load_settings(config_path);
  s.renderer.mode = RendererMode::kTemplate;  // replays are deterministic by definition
  const Orchestrator orch(s.policy, store.content(), Renderer(s.renderer, s.templates));
  const auto result = replay_scenario(store.find(scenario), policy_from_string(policy), orch);
  if (!trace.empty()) {
    std::string lines;
    for (const auto& t : result.traces) lines += trace_to_jsonl(t);
    write_file(trace, lines);
  }
  std::cout << replay_to_json(result).dump(2) << "\n";
  return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& data_dir,
              const std::string& renderer_mode, const std::string& config_path) {
  Settings s = load_settings(config_path);
  s.renderer.mode = renderer_mode_from_string(renderer_mode);
  if (s.renderer.mode == RendererMode::kFallback) {
    throw ValidationError("renderer", "--renderer must be template or llm");
  }
  auto scenarios = std::make_shared<ScenarioStore>(ScenarioStore::embedded());
  RendererConfig base_rc = s.renderer;
  base_rc.max_tokens = RendererConfig::baseline().max_tokens;
  auto es = std::make_shared<Orchestrator>(s.policy, scenarios->content(),
                                           Renderer(s.renderer, s.templates, make_client(s.renderer)));
  auto baseline = std::make_shared<Orchestrator>(s.policy, scenarios->content(),
                                                 Renderer(base_rc, s.templates, make_client(base_rc)));
  TutorService service(es, baseline, scenarios, data_dir);
  const auto recovered = service.recover();

  httplib::Server server;
  mount_api(server, service);
  std::cerr << "serving /api/v1 on " << host << ":" << port << " (data " << data_dir << ", "
            << recovered << " sessions recovered, renderer " << renderer_mode << ")\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

int cmd_ingest(const std::string& input, const std::string& out, const std::string& column_map,
               bool skip_bad, const std::string& config_path) {
  std::ifstream in(input);
  if (!in) throw NotFoundError("cannot open " + input);
  IngestOptions opts;
  if (!column_map.empty()) opts.columns = ColumnMap::load(column_map);
  opts.on_row_error = skip_bad ? RowErrorPolicy::kSkip : RowErrorPolicy::kAbort;
  const auto result = ingest_log(in, opts);
  for (const auto& e : result.skipped) std::cerr << "skipped: " << e.what() << "\n";

  const Settings s = load_settings(config_path);
  FeatureExtractor fx(s.policy.features, s.policy.bkt, s.policy.mastery_threshold);
  std::ofstream o(out, std::ios::binary | std::ios::trunc);
  if (!o) throw Error("cannot write " + out);
  for (const auto& ev : result.events) {
    nlohmann::json j = fx.consume(ev);
    j["learner_id"] = ev.learner_id;
    j["skill_id"] = ev.skill_id;
    j["problem_id"] = ev.problem_id;
    j["timestamp_ms"] = ev.timestamp_ms;
    o << j.dump() << '\n';
  }
  std::cerr << result.events.size() << " events, " << result.skipped.size() << " rows skipped\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule-orchestrated tutoring engine and simulation lab"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo over synthetic students");
  std::string sim_policy = "both", sim_out = "report.json", sim_csv, sim_config;
  std::optional<std::size_t> sim_runs;
  std::optional<double> sim_noise;
  std::optional<std::uint64_t> sim_seed;
  unsigned sim_threads = 1;
  sim->add_option("--policy", sim_policy)->check(CLI::IsMember({"es", "baseline", "both"}));
  sim->add_option("--runs", sim_runs, "runs per archetype [600]");
  sim->add_option("--noise", sim_noise, "Gaussian sigma on archetype parameters [0.05]");
  sim->add_option("--seed", sim_seed, "master seed [42]");
  sim->add_option("--out", sim_out);
  sim->add_option("--csv", sim_csv, "also write per-run metrics as CSV");
  sim->add_option("--config", sim_config, "policy / archetype config JSON");
  sim->add_option("--threads", sim_threads, "worker threads (report is identical for any value)");

  auto* cmp = app.add_subcommand("compare", "Table of es vs baseline with Wilcoxon p-values");
  std::string cmp_es, cmp_base, cmp_csv;
  cmp->add_option("es", cmp_es)->required();
  cmp->add_option("baseline", cmp_base)->required();
  cmp->add_option("--csv", cmp_csv);

  auto* rep = app.add_subcommand("replay", "Run a scripted scenario");
  std::string rep_scenario, rep_policy = "es", rep_trace, rep_scenarios, rep_config;
  rep->add_option("--scenario", rep_scenario)->required();
  rep->add_option("--policy", rep_policy)->check(CLI::IsMember({"es", "baseline"}));
  rep->add_option("--trace", rep_trace, "write the turn traces as JSONL");
  rep->add_option("--scenarios", rep_scenarios, "scenario file instead of the built-in suite");
  rep->add_option("--policy-config", rep_config);

  auto* srv = app.add_subcommand("serve", "HTTP API for interactive sessions");
  std::string srv_host = "127.0.0.1", srv_data = "data", srv_renderer = "template", srv_config;
  int srv_port = 8080;
  srv->add_option("--host", srv_host);
  srv->add_option("--port", srv_port);
  srv->add_option("--data-dir", srv_data);
  srv->add_option("--renderer", srv_renderer)->check(CLI::IsMember({"template", "llm"}));
  srv->add_option("--policy-config", srv_config);

  auto* ing = app.add_subcommand("ingest", "Interaction CSV to per-event feature JSONL");
  std::string ing_in, ing_out = "features.jsonl", ing_map, ing_config;
  bool ing_skip = false;
  ing->add_option("--input", ing_in)->required();
  ing->add_option("--out", ing_out);
  ing->add_option("--column-map", ing_map);
  ing->add_flag("--skip-bad-rows", ing_skip, "skip malformed rows instead of aborting");
  ing->add_option("--policy-config", ing_config);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_policy, sim_runs, sim_noise, sim_seed, sim_out, sim_csv, sim_config, sim_threads);
    if (*cmp) return cmd_compare(cmp_es, cmp_base, cmp_csv);
    if (*rep) return cmd_replay(rep_scenario, rep_policy, rep_trace, rep_scenarios, rep_config);
    if (*srv) return cmd_serve(srv_host, srv_port, srv_data, srv_renderer, srv_config);
    if (*ing) return cmd_ingest(ing_in, ing_out, ing_map, ing_skip, ing_config);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << (e.field().empty() ? "" : " [" + e.field() + "]") << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
