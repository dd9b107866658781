#include "coopcause/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "coopcause/error.hpp"
#include "coopcause/metrics.hpp"
#include "coopcause/simulator.hpp"
#include "coopcause/surrogate.hpp"
#include "coopcause/text.hpp"

namespace coopcause::cli {

namespace fs = std::filesystem;

namespace {

struct RunFlags {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::string out;
  double penetration = -1.0;
};

struct CompareFlags {
  std::string scenario;
  std::vector<std::string> methods;
  int seeds = 20;
  std::string out;
  int jobs = 0;
};

struct SweepFlags {
  std::string scenario;
  std::string method;
  std::vector<double> rates{0.1, 0.5, 0.75, 1.0};
  int seeds = 20;
  std::string out;
  int jobs = 0;
};

struct MineFlags {
  std::string dataset;
  std::string from_scenario;
  std::string truths;
  std::size_t samples = kDefaultTrainingPerCause;
  std::uint64_t seed = kDefaultTrainingSeed;
  double minsup = 0.25;
  double mincon = 0.8;
  bool supervised = false;
  std::string out;
};

struct CombineFlags {
  std::string masses;
  std::string rule = "conjunctive";
  bool betp = false;
};

struct ReportFlags {
  std::string log;
  std::string scenario;
  std::string out;
};

ScenarioConfig load(const std::string& name) { return load_scenario(resolve_scenario(name)); }

Method method_flag(const std::string& text) {
  const auto m = parse_method(text);
  if (!m) throw ConfigError("unknown method '" + text + "' (expected BP, VP, BF, DAT or beta-dat)");
  return *m;
}

int jobs_flag(int jobs) {
  if (jobs < 0) throw ConfigError("--jobs must be non-negative");
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::uint64_t> seed_list(int seeds) {
  if (seeds < 1) throw ConfigError("--seeds must be at least 1");
  std::vector<std::uint64_t> out;
  for (int s = 0; s < seeds; ++s) out.push_back(static_cast<std::uint64_t>(s));
  return out;
}

fs::path out_dir(const std::string& flag) {
  fs::path dir = flag.empty() ? fs::path(default_out_dir()) : fs::path(flag);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  writer(f);
  if (!f) throw DomainError("write failed for '" + path.string() + "'");
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
  ScenarioConfig cfg = load(flags.scenario);
  if (!flags.method.empty()) cfg.method.method = method_flag(flags.method);
  if (flags.penetration >= 0.0) {
    cfg.comms.penetration = flags.penetration;
    cfg.validate();
  }
  const fs::path dir = out_dir(flags.out);
  const EventLog log = run(cfg, flags.seed);
  const RunMetrics m = compute_metrics(log, GroundTruth::from_scenario(cfg), cfg, flags.seed);
  const std::vector<RunMetrics> runs{m};
  write_file(dir / "events.csv", [&](std::ostream& f) { write_event_log_csv(f, log); });
  write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, runs); });
  write_file(dir / "accuracy.csv", [&](std::ostream& f) { write_accuracy_csv(f, runs); });
  out << "run " << cfg.id << " method=" << to_string(cfg.method.method) << " seed=" << flags.seed
      << " records=" << log.records().size() << " -> " << dir.string() << '\n';
  return kExitOk;
}

int cmd_compare(const CompareFlags& flags, std::ostream& out) {
  const ScenarioConfig cfg = load(flags.scenario);
  if (flags.methods.empty()) throw ConfigError("--methods needs at least one method");
  std::vector<Method> methods;
  for (const auto& m : flags.methods) methods.push_back(method_flag(m));
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  const auto seeds = seed_list(flags.seeds);
  const int jobs = jobs_flag(flags.jobs);
  const fs::path dir = out_dir(flags.out);

  std::vector<RunKey> keys;
  for (Method m : methods) {
    for (auto s : seeds) keys.push_back({m, cfg.comms.penetration, s});
  }
  const auto runs = run_batch(cfg, keys, jobs);
  write_file(dir / "summary.csv", [&](std::ostream& f) { write_summary_csv(f, runs, cfg.horizon); });
  write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, runs); });
  write_file(dir / "accuracy.csv", [&](std::ostream& f) { write_accuracy_csv(f, runs); });
  out << "compare " << cfg.id << ": " << runs.size() << " runs -> " << dir.string() << '\n';
  return kExitOk;
}

int cmd_sweep(const SweepFlags& flags, std::ostream& out) {
  const ScenarioConfig cfg = load(flags.scenario);
  const Method method = flags.method.empty() ? cfg.method.method : method_flag(flags.method);
  if (flags.rates.empty()) throw ConfigError("--rates needs at least one rate");
  const auto seeds = seed_list(flags.seeds);
  for (double r : flags.rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("penetration out of range: " + text::format_double(r));
  }
  const int jobs = jobs_flag(flags.jobs);
  const fs::path dir = out_dir(flags.out);
  const SweepTable table = penetration_sweep(cfg, flags.rates, seeds, method, jobs);
  write_file(dir / "sweep.csv", [&](std::ostream& f) { write_sweep_csv(f, table); });
  out << "sweep " << cfg.id << " method=" << to_string(method) << ": " << table.rows.size() << " runs -> "
      << dir.string() << '\n';
  return kExitOk;
}

int cmd_mine(const MineFlags& flags, std::ostream& out) {
  if (flags.dataset.empty() == flags.from_scenario.empty()) {
    throw ConfigError("mine needs exactly one of --dataset or --from-scenario");
  }
  const MiningConfig mining{flags.minsup, flags.mincon};
  mining.validate();
  Dataset d;
  if (!flags.dataset.empty()) {
    d = load_dataset(flags.dataset);
  } else {
    if (flags.samples == 0) throw ConfigError("--samples must be at least 1");
    std::vector<Cause> truths(kAllCauses.begin(), kAllCauses.end());
    if (!flags.truths.empty()) {
      const auto set = CauseSet::parse(flags.truths);
      if (!set || set->is_empty()) throw ConfigError("--truths expects cause codes such as I,Wo");
      truths.clear();
      for (Cause c : kAllCauses) {
        if (set->contains(c)) truths.push_back(c);
      }
    }
    d = surrogate_training_set(load(flags.from_scenario).classifier, flags.samples, flags.seed, truths);
  }
  const RuleBook book =
      flags.supervised ? mine_supervised(d, mining) : generate_rules(apriori_frequent(d, mining.minsup), d, mining.mincon);
  if (flags.out.empty()) {
    write_rulebook_csv(out, book);
  } else {
    const fs::path dir = out_dir(flags.out);
    write_file(dir / "rulebook.csv", [&](std::ostream& f) { write_rulebook_csv(f, book); });
    out << "mined " << book.size() << " rules from " << d.size() << " transactions -> " << dir.string() << '\n';
  }
  return kExitOk;
}

int cmd_combine(const CombineFlags& flags, std::ostream& out) {
  const auto rule = parse_combination_rule(flags.rule);
  if (!rule) throw ConfigError("unknown combination rule '" + flags.rule + "' (expected conjunctive or dempster)");
  std::ifstream in(flags.masses);
  if (!in) throw ConfigError("cannot open mass file '" + flags.masses + "'");
  const auto masses = parse_masses(in);
  const MassFunction combined = combine_all(masses, *rule);
  std::ostringstream buf;
  buf << "subset,mass\n";
  for (const auto& [set, mass] : combined.focal()) buf << text::csv_field(set.to_string()) << ',' << text::format_double(mass) << '\n';
  if (flags.betp) {
    const CauseVector p = pignistic(combined);
    buf << "cause,betp\n";
    for (Cause c : kAllCauses) buf << code(c) << ',' << text::format_double(p[c]) << '\n';
  }
  out << buf.str();
  return kExitOk;
}

int cmd_report(const ReportFlags& flags, std::ostream& out) {
  const ScenarioConfig cfg = load(flags.scenario);
  std::ifstream in(flags.log);
  if (!in) throw ConfigError("cannot open event log '" + flags.log + "'");
  const EventLog log = read_event_log_csv(in);

  // Method and seed come from the run's setup note.
  ScenarioConfig run_cfg = cfg;
  std::uint64_t seed = 0;
  for (const auto& r : log.records()) {
    if (r.kind != RecordKind::Setup || r.segment >= 0) continue;
    for (auto field : text::split(log.note(r.aux), ';')) {
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = text::trim(field.substr(0, eq));
      const auto value = text::trim(field.substr(eq + 1));
      if (key == "method") {
        run_cfg.method.method = method_flag(std::string(value));
      } else if (key == "seed") {
        const auto s = text::parse_int(value);
        if (!s || *s < 0) throw ConfigError("event log has a malformed seed");
        seed = static_cast<std::uint64_t>(*s);
      } else if (key == "penetration") {
        const auto p = text::parse_double(value);
        if (!p) throw ConfigError("event log has a malformed penetration");
        run_cfg.comms.penetration = *p;
      }
    }
    break;
  }
  const std::vector<RunMetrics> runs{compute_metrics(log, GroundTruth::from_scenario(run_cfg), run_cfg, seed)};
  if (flags.out.empty()) {
    write_metrics_csv(out, runs);
  } else {
    const fs::path dir = out_dir(flags.out);
    write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, runs); });
    write_file(dir / "accuracy.csv", [&](std::ostream& f) { write_accuracy_csv(f, runs); });
    out << "report " << cfg.id << " -> " << dir.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

std::string default_out_dir() {
  const char* env = std::getenv("COOPCAUSE_OUT");
  return env && *env ? std::string(env) : std::string("out");
}

std::vector<MassFunction> parse_masses(std::istream& in) {
  std::vector<MassFunction> out;
  std::optional<MassFunction> current;
  std::size_t current_line = 0;
  const auto finish = [&] {
    if (!current) return;
    if (const auto problem = validate_mass(*current)) {
      throw ConfigError("mass function " + std::to_string(out.size() + 1) + " (ending line " +
                        std::to_string(current_line) + ") is invalid: " + *problem);
    }
    out.push_back(*current);
    current.reset();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) {
      // A comment-only line does not end a block.
      if (text::trim(line).empty()) finish();
      continue;
    }
    const auto colon = body.rfind(':');
    if (colon == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected subset:mass");
    const auto set = CauseSet::parse(text::trim(body.substr(0, colon)));
    const auto mass = text::parse_double(body.substr(colon + 1));
    if (!set) throw ConfigError("line " + std::to_string(line_no) + ": unknown subset '" + std::string(body.substr(0, colon)) + "'");
    if (!mass) throw ConfigError("line " + std::to_string(line_no) + ": bad mass '" + std::string(body.substr(colon + 1)) + "'");
    if (!current) current.emplace();
    current->add(*set, *mass);
    current_line = line_no;
  }
  finish();
  if (out.empty()) throw ConfigError("mass file holds no mass function");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooperative congestion-cause estimation: simulate, compare, sweep, mine, combine."};
  app.name("coopcause");
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation and write events, metrics and accuracy CSVs");
  run_cmd->add_option("--scenario", run_flags.scenario, "Scenario name or path")->required();
  run_cmd->add_option("--method", run_flags.method, "BP, VP, BF, DAT or beta-dat (default: scenario)");
  run_cmd->add_option("--seed", run_flags.seed, "Random seed")->capture_default_str();
  run_cmd->add_option("--penetration", run_flags.penetration, "Override the equipped share");
  run_cmd->add_option("--out", run_flags.out, "Output directory (default: $COOPCAUSE_OUT or ./out)");

  CompareFlags cmp_flags;
  cmp_flags.methods = {"BP", "VP", "BF", "DAT", "beta-dat"};
  auto* cmp_cmd = app.add_subcommand("compare", "Run every method over seeds 0..k-1 and summarize");
  cmp_cmd->add_option("--scenario", cmp_flags.scenario, "Scenario name or path")->required();
  cmp_cmd->add_option("--methods", cmp_flags.methods, "Methods to compare")->delimiter(',')->capture_default_str();
  cmp_cmd->add_option("--seeds", cmp_flags.seeds, "Number of seeds")->capture_default_str();
  cmp_cmd->add_option("--jobs", cmp_flags.jobs, "Parallel runs (0: one per core)");
  cmp_cmd->add_option("--out", cmp_flags.out, "Output directory");

  SweepFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Penetration-rate sweep");
  sweep_cmd->add_option("--scenario", sweep_flags.scenario, "Scenario name or path")->required();
  sweep_cmd->add_option("--method", sweep_flags.method, "Method (default: scenario)");
  sweep_cmd->add_option("--rates", sweep_flags.rates, "Penetration rates")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_flags.seeds, "Number of seeds")->capture_default_str();
  sweep_cmd->add_option("--jobs", sweep_flags.jobs, "Parallel runs (0: one per core)");
  sweep_cmd->add_option("--out", sweep_flags.out, "Output directory");

  MineFlags mine_flags;
  auto* mine_cmd = app.add_subcommand("mine", "Mine association rules from a transaction dataset");
  auto* ds = mine_cmd->add_option("--dataset", mine_flags.dataset, "Transaction file");
  auto* fs_opt = mine_cmd->add_option("--from-scenario", mine_flags.from_scenario,
                                      "Draw a labeled dataset from the scenario's classifier");
  ds->excludes(fs_opt);
  mine_cmd->add_option("--truths", mine_flags.truths, "Truths drawn with --from-scenario (default: all)");
  mine_cmd->add_option("--samples", mine_flags.samples, "Transactions per cause with --from-scenario")
      ->capture_default_str();
  mine_cmd->add_option("--seed", mine_flags.seed, "Seed with --from-scenario")->capture_default_str();
  mine_cmd->add_option("--minsup", mine_flags.minsup, "Minimum support")->capture_default_str();
  mine_cmd->add_option("--mincon", mine_flags.mincon, "Minimum confidence")->capture_default_str();
  mine_cmd->add_flag("--supervised", mine_flags.supervised, "Also mine {guess,label}->{label} corrections");
  mine_cmd->add_option("--out", mine_flags.out, "Write rulebook.csv here instead of stdout");

  CombineFlags comb_flags;
  auto* comb_cmd = app.add_subcommand("combine", "Fold mass functions and print the result");
  comb_cmd->add_option("--masses", comb_flags.masses, "Mass file")->required();
  comb_cmd->add_option("--rule", comb_flags.rule, "conjunctive or dempster")->capture_default_str();
  comb_cmd->add_flag("--betp", comb_flags.betp, "Append the pignistic probabilities");

  ReportFlags rep_flags;
  auto* rep_cmd = app.add_subcommand("report", "Recompute metrics from a saved event log");
  rep_cmd->add_option("--log", rep_flags.log, "events.csv from a previous run")->required();
  rep_cmd->add_option("--scenario", rep_flags.scenario, "Scenario the log was produced from")->required();
  rep_cmd->add_option("--out", rep_flags.out, "Output directory (default: print metrics)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run_flags, out);
    if (*cmp_cmd) return cmd_compare(cmp_flags, out);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, out);
    if (*mine_cmd) return cmd_mine(mine_flags, out);
    if (*comb_cmd) return cmd_combine(comb_flags, out);
    if (*rep_cmd) return cmd_report(rep_flags, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace coopcause::cli
