#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "playtest/bot.hpp"
#include "playtest/mutation.hpp"
#include "playtest/policy.hpp"
#include "playtest/server.hpp"
#include "playtest/store.hpp"
#include "playtest/synthesis.hpp"

namespace fs = std::filesystem;
using namespace playtest;

namespace {

MatchConfig load_config(const std::string& path) {
  if (path.empty()) return MatchConfig{};
  fs::path p(path);
  return parse_config(detail::read_file(p), p.parent_path());
}

RuleScript load_script(const std::string& path) {
  return path.empty() ? default_script() : parse_script(detail::read_file(path));
}

std::string padded(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return buf;
}

std::vector<fs::path> files_with_prefix(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw IntegrityError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind(prefix, 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_serve(int port, const std::string& config_path, const std::string& store) {
  // Worker threads inherit the blocked mask; the main thread waits for the signal.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  Server server(load_config(config_path), store.empty() ? default_store_root() : fs::path(store));
  int bound = server.start(port);
  std::cerr << "listening on 127.0.0.1:" << bound << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  return 0;
}

int cmd_bot_match(std::uint64_t seed, const std::string& bots, const std::string& out, const std::string& config_path) {
  auto names = split(bots, ',');
  if (names.size() != 2) throw PreconditionError("--bots needs two comma-separated bot kinds");
  MatchConfig config = load_config(config_path);
  config.match_seed = seed;
  auto result = run_bot_match(config, {bot_kind_from_name(names[0]), bot_kind_from_name(names[1])});
  fs::path dir = write_record(out, "match-" + std::to_string(seed), result.state, result.log);
  const auto& s = result.state;
  std::cout << "match\t" << dir.filename().string() << "\n"
            << "rounds\t" << s.round << "\n"
            << "winner\t" << (s.winner ? *s.winner : -1) << "\n"
            << "life\t" << s.players[0].life << "\t" << s.players[1].life << "\n"
            << "hash\t" << state_hash(s) << "\n";
  return 0;
}

int cmd_export_tests(const std::string& store, const std::string& out, int threshold_arg, const std::string& script_path) {
  fs::path root = store.empty() ? default_store_root() : fs::path(store);
  auto records = list_records(root);
  Harvest all;
  std::optional<RuleScript> script;
  if (!script_path.empty()) script = load_script(script_path);
  for (const auto& dir : records) {
    StoreRecord r = read_record(dir);
    if (!verify_record(r)) throw IntegrityError(r.match_id + ": command log does not reproduce the final state hash");
    if (!script) script = r.config.script;
    all.append(r.harvest);
  }
  if (!script) script = default_script();
  const auto hash = script_hash(*script);
  for (const auto& t : all.traces) {
    if (t.script_hash != hash) throw IntegrityError("harvested trace was recorded on a different script");
  }

  std::size_t threshold =
      threshold_arg >= 0 ? static_cast<std::size_t>(threshold_arg) : default_dedup_threshold(all.traces);
  std::vector<std::string> log;
  auto tests = synthesize_static(*script, all, threshold, &log);
  for (const auto& line : log) std::cerr << line << "\n";

  fs::create_directories(out);
  for (std::size_t k = 0; k < tests.size(); ++k)
    detail::write_file(fs::path(out) / ("test-" + padded(k) + ".txt"), serialize_static_test(tests[k]));

  auto reps = dedup_traces(all.traces, threshold);
  std::size_t policies = 0;
  for (const auto& s : script->statements) {
    if (s.deleted) continue;
    if (traces_covering(reps, s.id) < kMinPolicyTraces) continue;
    try {
      PolicyNet net = train_policy(reps, s.id);
      detail::write_file(fs::path(out) / ("policy-" + padded(static_cast<std::size_t>(s.id)) + ".txt"),
                         serialize_policy(net));
      ++policies;
    } catch (const PreconditionError& e) {
      std::cerr << "statement " << s.id << ": " << e.what() << "\n";
    }
  }
  std::cout << "records\t" << records.size() << "\n"
            << "traces\t" << all.traces.size() << "\n"
            << "representatives\t" << reps.size() << "\n"
            << "static_tests\t" << tests.size() << "\n"
            << "policies\t" << policies << "\n";
  return 0;
}

int cmd_eval_suite(const std::string& tests_dir, const std::string& script_path, const std::string& mutants_arg,
                   std::uint64_t seed) {
  RuleScript script = load_script(script_path);
  std::vector<StaticTest> tests;
  for (const auto& p : files_with_prefix(tests_dir, "test-")) tests.push_back(parse_static_test(detail::read_file(p)));
  std::vector<Mutant> mutants;
  if (mutants_arg == "all") {
    mutants = enumerate_mutants(script);
  } else {
    auto n = parse_int(mutants_arg, "--mutants");
    if (n < 0) throw PreconditionError("--mutants must be 'all' or a non-negative count");
    mutants = select_round_mutants(script, static_cast<std::size_t>(n), seed);
  }
  std::cout << suite_report_to_text(run_suite(tests, script, mutants));
  return 0;
}

int cmd_mutate(const std::string& script_path, bool list) {
  RuleScript script = load_script(script_path);
  auto mutants = enumerate_mutants(script);
  if (!list) {
    std::cout << mutants.size() << "\n";
    return 0;
  }
  for (const auto& m : mutants) std::cout << to_descriptor(m) << "\n";
  return 0;
}

int cmd_verify_store(const std::string& store) {
  fs::path root = store.empty() ? default_store_root() : fs::path(store);
  int bad = 0;
  for (const auto& dir : list_records(root)) {
    bool ok = verify_record(read_record(dir));
    std::cout << dir.filename().string() << "\t" << (ok ? "ok" : "MISMATCH") << "\n";
    bad += ok ? 0 : 1;
  }
  if (bad) std::cerr << bad << " record(s) failed replay\n";
  return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assertion-based playtesting game: match server, bots and test tools"};
  app.require_subcommand(1);

  int port = 7777;
  std::string config_path, store, out, bots = "greedy,greedy", tests_dir, script_path, mutants_arg = "all";
  std::uint64_t seed = 1;
  int threshold = -1;
  bool list = false;

  auto* serve = app.add_subcommand("serve", "Run the match server");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--config", config_path, "MatchConfig file");
  serve->add_option("--store", store, "Store directory (default: $PLAYTEST_STORE or ./playtest-store)");

  auto* bm = app.add_subcommand("bot-match", "Play a headless bot match and store it");
  bm->add_option("--seed", seed, "Match seed")->required();
  bm->add_option("--bots", bots, "Two bot kinds, e.g. greedy,random");
  bm->add_option("--out", out, "Store directory")->required();
  bm->add_option("--config", config_path, "MatchConfig file");

  auto* ex = app.add_subcommand("export-tests", "Harvest the store and write static tests and policies");
  ex->add_option("--store", store, "Store directory")->required();
  ex->add_option("--out", out, "Output directory")->required();
  ex->add_option("--threshold", threshold, "Trace dedup edit-distance threshold (default: 10% of mean length)");
  ex->add_option("--script", script_path, "RuleScript file (default: from the store)");

  auto* ev = app.add_subcommand("eval-suite", "Score a static test suite against mutants");
  ev->add_option("--tests", tests_dir, "Directory of test-*.txt files")->required();
  ev->add_option("--script", script_path, "RuleScript file (default: built-in script)");
  ev->add_option("--mutants", mutants_arg, "'all' or a sample size");
  ev->add_option("--seed", seed, "Sampling seed when --mutants is a count");

  auto* mu = app.add_subcommand("mutate", "Enumerate first-order mutants");
  mu->add_option("--script", script_path, "RuleScript file (default: built-in script)");
  mu->add_flag("--list", list, "Print one descriptor per mutant");

  auto* vs = app.add_subcommand("verify-store", "Replay every stored command log and compare hashes");
  vs->add_option("--store", store, "Store directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(port, config_path, store);
    if (*bm) return cmd_bot_match(seed, bots, out, config_path);
    if (*ex) return cmd_export_tests(store, out, threshold, script_path);
    if (*ev) return cmd_eval_suite(tests_dir, script_path, mutants_arg, seed);
    if (*mu) return cmd_mutate(script_path, list);
    if (*vs) return cmd_verify_store(store);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
