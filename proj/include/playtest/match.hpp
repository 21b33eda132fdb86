#pragma once

// The Play module: alternating Planning and Execution phases over a shared
// RuleScript, an action-point economy, attribute upgrades and damage.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "playtest/assertion.hpp"
#include "playtest/game.hpp"
#include "playtest/mutation.hpp"
#include "playtest/util.hpp"

namespace playtest {

inline constexpr int kPlayers = 2;

struct MatchConfig {
  int starting_life = 100;
  int starting_ap = 10;
  int playthrough_time = 150;  // ticks
  int base_damage = 5;
  int attack_step = 2;
  int armour_step = 3;
  int base_mutants = 5;
  int mutants_per_level = 2;
  int default_ap = 10;
  int coverage_ap_max = 10;
  int time_growth = 30;  // ticks added to both players after every Execution Phase
  int time_upgrade = 30;  // ticks added by one PlaythroughTime purchase
  int upgrade_price = 8;
  int construct_price = 5;
  int max_rounds = 30;
  int planning_seconds = 120;
  int grace_seconds = 30;
  std::uint64_t match_seed = 0;
  RuleScript script = default_script();
  LevelLayout level = default_level();
};

namespace detail {

inline int* config_int(MatchConfig& c, std::string_view key) {
  static const std::map<std::string_view, int MatchConfig::*> fields = {
      {"starting_life", &MatchConfig::starting_life},
      {"starting_ap", &MatchConfig::starting_ap},
      {"playthrough_time", &MatchConfig::playthrough_time},
      {"base_damage", &MatchConfig::base_damage},
      {"attack_step", &MatchConfig::attack_step},
      {"armour_step", &MatchConfig::armour_step},
      {"base_mutants", &MatchConfig::base_mutants},
      {"mutants_per_level", &MatchConfig::mutants_per_level},
      {"default_ap", &MatchConfig::default_ap},
      {"coverage_ap_max", &MatchConfig::coverage_ap_max},
      {"time_growth", &MatchConfig::time_growth},
      {"time_upgrade", &MatchConfig::time_upgrade},
      {"upgrade_price", &MatchConfig::upgrade_price},
      {"construct_price", &MatchConfig::construct_price},
      {"max_rounds", &MatchConfig::max_rounds},
      {"planning_seconds", &MatchConfig::planning_seconds},
      {"grace_seconds", &MatchConfig::grace_seconds},
  };
  auto it = fields.find(key);
  return it == fields.end() ? nullptr : &(c.*(it->second));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IntegrityError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// key=value lines; '#' starts a comment. script_file / level_file are resolved
// relative to `base_dir`.
inline MatchConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  MatchConfig c;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (int* field = detail::config_int(c, key)) {
      *field = static_cast<int>(parse_int(value, key.c_str()));
    } else if (key == "match_seed") {
      c.match_seed = parse_u64(value, "match_seed");
    } else if (key == "script_file") {
      c.script = parse_script(detail::read_file(base_dir / value));
    } else if (key == "level_file") {
      c.level = parse_level(detail::read_file(base_dir / value));
    } else {
      throw IntegrityError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  return c;
}

inline std::string config_to_text(const MatchConfig& c) {
  std::ostringstream os;
  auto put = [&](const char* k, long long v) { os << k << '=' << v << '\n'; };
  put("starting_life", c.starting_life);
  put("starting_ap", c.starting_ap);
  put("playthrough_time", c.playthrough_time);
  put("base_damage", c.base_damage);
  put("attack_step", c.attack_step);
  put("armour_step", c.armour_step);
  put("base_mutants", c.base_mutants);
  put("mutants_per_level", c.mutants_per_level);
  put("default_ap", c.default_ap);
  put("coverage_ap_max", c.coverage_ap_max);
  put("time_growth", c.time_growth);
  put("time_upgrade", c.time_upgrade);
  put("upgrade_price", c.upgrade_price);
  put("construct_price", c.construct_price);
  put("max_rounds", c.max_rounds);
  put("planning_seconds", c.planning_seconds);
  put("grace_seconds", c.grace_seconds);
  os << "match_seed=" << c.match_seed << '\n';
  return os.str();
}

enum class Phase { Planning, Execution, Finished };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Planning: return "Planning";
    case Phase::Execution: return "Execution";
    case Phase::Finished: return "Finished";
  }
  return "?";
}

enum class PurchaseItem { Construct, Attack, Armour, PlaythroughTime, MutantCount };

inline std::string_view item_name(PurchaseItem i) {
  switch (i) {
    case PurchaseItem::Construct: return "construct";
    case PurchaseItem::Attack: return "attack";
    case PurchaseItem::Armour: return "armour";
    case PurchaseItem::PlaythroughTime: return "playthrough_time";
    case PurchaseItem::MutantCount: return "mutant_count";
  }
  return "?";
}

inline PurchaseItem item_from_name(std::string_view name) {
  for (auto i : {PurchaseItem::Construct, PurchaseItem::Attack, PurchaseItem::Armour, PurchaseItem::PlaythroughTime,
                 PurchaseItem::MutantCount}) {
    if (item_name(i) == name) return i;
  }
  throw IntegrityError("unknown purchase item '" + std::string(name) + "'");
}

inline int price(const MatchConfig& c, PurchaseItem item) {
  return item == PurchaseItem::Construct ? construct_cost(BlockKind::IfThen, c.construct_price) : c.upgrade_price;
}

struct PlayerState {
  int life = 0;
  int action_points = 0;
  int attack = 0;
  int armour = 0;
  int playthrough_time = 0;
  int mutant_count_attr = 0;
  std::vector<int> traces;
  std::vector<Assertion> assertions;
  int constructs = 0;  // unconsumed IfThen constructs
  bool recorded_this_phase = false;
  bool confirmed = false;
};

struct StoredTrace {
  int owner = 0;
  int round = 0;
  Trace trace;
};

struct MutantResult {
  Mutant mutant;
  bool killed = false;
  std::optional<std::string> killing_assertion;
  int trace_id = -1;
  Trace mutant_trace;
  std::vector<std::size_t> mutated;
};

struct PlayerExecution {
  std::vector<MutantResult> results;
  int damage_taken = 0;
  int action_points_awarded = 0;
};

struct ExecutionReport {
  int round = 0;
  std::array<PlayerExecution, kPlayers> players;
};

struct MatchState {
  MatchConfig config;
  std::array<PlayerState, kPlayers> players;
  Phase phase = Phase::Planning;
  int round = 1;
  std::int64_t phase_deadline = 0;  // ticks of wall-clock budget for the Planning Phase
  std::uint64_t round_seed = 0;
  std::optional<int> winner;
  std::vector<StoredTrace> traces;

  const RuleScript& script() const { return config.script; }
  const LevelLayout& level() const { return config.level; }
};

inline std::uint64_t round_seed_for(std::uint64_t match_seed, int round) {
  return mix_seed(match_seed, static_cast<std::uint64_t>(round));
}

inline MatchState start_match(const MatchConfig& config) {
  if (config.starting_life <= 0) throw PreconditionError("starting_life must be positive");
  if (config.starting_ap < 0 || config.playthrough_time < 0) throw PreconditionError("negative starting resources");
  validate(config.script);
  new_world(config.script, config.level, 0);  // throws LayoutError on a bad level

  MatchState m;
  m.config = config;
  for (auto& p : m.players) {
    p.life = config.starting_life;
    p.action_points = config.starting_ap;
    p.playthrough_time = config.playthrough_time;
  }
  m.round_seed = round_seed_for(config.match_seed, 1);
  m.phase_deadline = static_cast<std::int64_t>(config.planning_seconds) * kTicksPerSecond;
  return m;
}

namespace detail {

inline PlayerState& player_ref(MatchState& m, int player) {
  if (player < 0 || player >= kPlayers) throw RuleViolation("unknown player " + std::to_string(player));
  return m.players[static_cast<std::size_t>(player)];
}

inline void require_phase(const MatchState& m, Phase phase, const char* op) {
  if (m.phase != phase)
    throw RuleViolation(std::string(op) + " not allowed during " + std::string(phase_name(m.phase)) + " phase");
}

}  // namespace detail

inline int record_playthrough(MatchState& m, int player, const std::vector<Action>& actions, std::uint64_t trace_seed) {
  detail::require_phase(m, Phase::Planning, "recording");
  PlayerState& p = detail::player_ref(m, player);
  if (p.recorded_this_phase) throw RuleViolation("already recorded a playthrough this phase");
  if (actions.size() > static_cast<std::size_t>(p.playthrough_time))
    throw RuleViolation("playthrough exceeds " + std::to_string(p.playthrough_time) + " ticks");
  StoredTrace st{player, m.round, replay(m.script(), trace_seed, actions, m.level())};
  int id = static_cast<int>(m.traces.size());
  m.traces.push_back(std::move(st));
  p.traces.push_back(id);
  p.recorded_this_phase = true;
  return id;
}

inline void purchase(MatchState& m, int player, PurchaseItem item) {
  detail::require_phase(m, Phase::Planning, "purchasing");
  PlayerState& p = detail::player_ref(m, player);
  int cost = price(m.config, item);
  if (cost > p.action_points)
    throw RuleViolation("insufficient action points: need " + std::to_string(cost) + ", have " +
                        std::to_string(p.action_points));
  p.action_points -= cost;
  switch (item) {
    case PurchaseItem::Construct: ++p.constructs; break;
    case PurchaseItem::Attack: ++p.attack; break;
    case PurchaseItem::Armour: ++p.armour; break;
    case PurchaseItem::PlaythroughTime: p.playthrough_time += m.config.time_upgrade; break;
    case PurchaseItem::MutantCount: ++p.mutant_count_attr; break;
  }
}

inline void place_assertion(MatchState& m, int player, int trace_id, Assertion assertion) {
  detail::require_phase(m, Phase::Planning, "placing assertions");
  PlayerState& p = detail::player_ref(m, player);
  if (std::find(p.traces.begin(), p.traces.end(), trace_id) == p.traces.end())
    throw RuleViolation("trace " + std::to_string(trace_id) + " is not yours");
  if (p.constructs <= 0) throw RuleViolation("no IfThen construct in inventory");
  const Trace& trace = m.traces[static_cast<std::size_t>(trace_id)].trace;
  Verdict v;
  try {
    v = evaluate(assertion, trace);
  } catch (const PreconditionError& e) {
    throw RuleViolation(e.what());
  } catch (const SchemaError& e) {
    throw RuleViolation(e.what());
  }
  if (v.status == Verdict::Status::Violated)
    throw RuleViolation("assertion is violated by its own playthrough at step " + std::to_string(*v.violated_at));
  assertion.owner = player;
  assertion.source_trace = trace_id;
  p.assertions.push_back(std::move(assertion));
  --p.constructs;
}

// Irrevocable for the rest of the phase.
inline void confirm_done(MatchState& m, int player) {
  detail::require_phase(m, Phase::Planning, "confirming");
  detail::player_ref(m, player).confirmed = true;
}

inline bool both_confirmed(const MatchState& m) { return m.players[0].confirmed && m.players[1].confirmed; }

inline std::optional<int> check_winner(const MatchState& m) {
  bool dead0 = m.players[0].life <= 0;
  bool dead1 = m.players[1].life <= 0;
  if (dead0 && !dead1) return 1;
  if (dead1 && !dead0) return 0;
  return std::nullopt;
}

inline int coverage_award(const MatchState& m, int player) {
  std::vector<Trace> traces;
  for (int id : m.players[static_cast<std::size_t>(player)].traces)
    traces.push_back(m.traces[static_cast<std::size_t>(id)].trace);
  double cov = coverage(traces, m.script());
  return m.config.default_ap + static_cast<int>(std::lround(cov * m.config.coverage_ap_max));
}

inline std::size_t mutants_for(const MatchState& m, int defender) {
  const PlayerState& attacker = m.players[static_cast<std::size_t>(1 - defender)];
  return static_cast<std::size_t>(std::max(0, m.config.base_mutants + attacker.mutant_count_attr * m.config.mutants_per_level));
}

inline int damage_per_survivor(const MatchState& m, int defender) {
  const PlayerState& p = m.players[static_cast<std::size_t>(defender)];
  const PlayerState& q = m.players[static_cast<std::size_t>(1 - defender)];
  return std::max(0, m.config.base_damage + q.attack * m.config.attack_step - p.armour * m.config.armour_step);
}

namespace detail {

inline PlayerExecution evaluate_player(const MatchState& m, int player, const std::vector<Mutant>& mutants) {
  const PlayerState& p = m.players[static_cast<std::size_t>(player)];
  PlayerExecution out;
  for (const auto& mutant : mutants) {
    RuleScript mscript = apply(m.script(), mutant);
    MutantResult r;
    r.mutant = mutant;
    for (int tid : p.traces) {
      const Trace& original = m.traces[static_cast<std::size_t>(tid)].trace;
      Trace mt = replay(mscript, original.seed, original.actions, m.level());
      if (r.trace_id < 0) {
        r.trace_id = tid;
        r.mutant_trace = mt;
      }
      for (const auto& a : p.assertions) {
        if (a.source_trace != tid) continue;
        if (evaluate(a, mt, ScopePolicy::Clamp).status == Verdict::Status::Violated) {
          r.killed = true;
          r.killing_assertion = serialize(a);
          r.trace_id = tid;
          r.mutant_trace = std::move(mt);
          break;
        }
      }
      if (r.killed) break;
    }
    r.mutated = mutated_steps(r.mutant_trace, mutant);
    out.results.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

// Runs every player's traces and assertions against the round's mutants,
// resolves damage and moves to Execution (or Finished).
inline ExecutionReport end_planning(MatchState& m) {
  detail::require_phase(m, Phase::Planning, "ending the planning phase");
  ExecutionReport report;
  report.round = m.round;

  std::array<std::vector<Mutant>, kPlayers> mutants;
  for (int pl = 0; pl < kPlayers; ++pl) mutants[static_cast<std::size_t>(pl)] = select_round_mutants(m.script(), mutants_for(m, pl), m.round_seed);

  std::array<std::future<PlayerExecution>, kPlayers> jobs;
  for (int pl = 0; pl < kPlayers; ++pl) {
    jobs[static_cast<std::size_t>(pl)] = std::async(std::launch::async, [&m, pl, &mutants] {
      return detail::evaluate_player(m, pl, mutants[static_cast<std::size_t>(pl)]);
    });
  }
  for (int pl = 0; pl < kPlayers; ++pl) report.players[static_cast<std::size_t>(pl)] = jobs[static_cast<std::size_t>(pl)].get();

  for (int pl = 0; pl < kPlayers; ++pl) {
    auto& pe = report.players[static_cast<std::size_t>(pl)];
    int survivors = 0;
    for (const auto& r : pe.results) survivors += r.killed ? 0 : 1;
    pe.damage_taken = survivors * damage_per_survivor(m, pl);
    pe.action_points_awarded = coverage_award(m, pl);
  }
  for (int pl = 0; pl < kPlayers; ++pl) {
    auto& p = m.players[static_cast<std::size_t>(pl)];
    p.life = std::max(0, p.life - report.players[static_cast<std::size_t>(pl)].damage_taken);
  }

  bool any_dead = m.players[0].life == 0 || m.players[1].life == 0;
  if (any_dead) {
    m.phase = Phase::Finished;
    m.winner = check_winner(m);
  } else if (m.round >= m.config.max_rounds) {
    m.phase = Phase::Finished;
    if (m.players[0].life != m.players[1].life) m.winner = m.players[0].life > m.players[1].life ? 0 : 1;
  } else {
    m.phase = Phase::Execution;
  }
  return report;
}

inline void award_action_points(MatchState& m) {
  detail::require_phase(m, Phase::Execution, "awarding action points");
  std::array<int, kPlayers> award{coverage_award(m, 0), coverage_award(m, 1)};
  for (int pl = 0; pl < kPlayers; ++pl) {
    auto& p = m.players[static_cast<std::size_t>(pl)];
    p.action_points += award[static_cast<std::size_t>(pl)];
    p.playthrough_time += m.config.time_growth;
  }
}

// Execution -> Planning of the next round.
inline void next_round(MatchState& m) {
  award_action_points(m);
  ++m.round;
  m.round_seed = round_seed_for(m.config.match_seed, m.round);
  for (auto& p : m.players) {
    p.recorded_this_phase = false;
    p.confirmed = false;
  }
  m.phase = Phase::Planning;
}

inline void forfeit(MatchState& m, int player) {
  if (m.phase == Phase::Finished) throw RuleViolation("match already finished");
  detail::player_ref(m, player);
  m.phase = Phase::Finished;
  m.winner = 1 - player;
}

// --- command log ------------------------------------------------------------

struct Command {
  enum class Type { Record, Purchase, Place, Confirm, EndPlanning, NextRound, Forfeit };
  Type type = Type::Confirm;
  int player = -1;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  PurchaseItem item = PurchaseItem::Construct;
  int trace_id = -1;
  std::string assertion;

  static Command record(int player, std::uint64_t seed, std::vector<Action> actions) {
    Command c;
    c.type = Type::Record;
    c.player = player;
    c.seed = seed;
    c.actions = std::move(actions);
    return c;
  }
  static Command buy(int player, PurchaseItem item) {
    Command c;
    c.type = Type::Purchase;
    c.player = player;
    c.item = item;
    return c;
  }
  static Command place(int player, int trace_id, std::string assertion) {
    Command c;
    c.type = Type::Place;
    c.player = player;
    c.trace_id = trace_id;
    c.assertion = std::move(assertion);
    return c;
  }
  static Command of(Type t, int player = -1) {
    Command c;
    c.type = t;
    c.player = player;
    return c;
  }

  bool operator==(const Command&) const = default;
};

inline std::string command_to_text(const Command& c) {
  std::string p = std::to_string(c.player);
  switch (c.type) {
    case Command::Type::Record: return "record\t" + p + "\t" + std::to_string(c.seed) + "\t" + actions_to_letters(c.actions);
    case Command::Type::Purchase: return "purchase\t" + p + "\t" + std::string(item_name(c.item));
    case Command::Type::Place: return "place\t" + p + "\t" + std::to_string(c.trace_id) + "\t" + c.assertion;
    case Command::Type::Confirm: return "confirm\t" + p;
    case Command::Type::EndPlanning: return "end_planning";
    case Command::Type::NextRound: return "next_round";
    case Command::Type::Forfeit: return "forfeit\t" + p;
  }
  return {};
}

inline Command command_from_text(std::string_view line) {
  auto f = split(line, '\t');
  const std::string& verb = f[0];
  auto need = [&](std::size_t n) {
    if (f.size() != n) throw IntegrityError("malformed command '" + std::string(line) + "'");
  };
  auto player = [&] { return static_cast<int>(parse_int(f[1], "player")); };
  if (verb == "record") {
    need(4);
    return Command::record(player(), parse_u64(f[2], "seed"), actions_from_letters(f[3]));
  }
  if (verb == "purchase") {
    need(3);
    return Command::buy(player(), item_from_name(f[2]));
  }
  if (verb == "place") {
    need(4);
    return Command::place(player(), static_cast<int>(parse_int(f[2], "trace")), f[3]);
  }
  if (verb == "confirm") {
    need(2);
    return Command::of(Command::Type::Confirm, player());
  }
  if (verb == "forfeit") {
    need(2);
    return Command::of(Command::Type::Forfeit, player());
  }
  if (verb == "end_planning") {
    need(1);
    return Command::of(Command::Type::EndPlanning);
  }
  if (verb == "next_round") {
    need(1);
    return Command::of(Command::Type::NextRound);
  }
  throw IntegrityError("unknown command '" + verb + "'");
}

// Single entry point used by the server, bots and log replay. Rejected
// commands throw and leave the state unchanged.
inline std::optional<ExecutionReport> apply_command(MatchState& m, const Command& c) {
  switch (c.type) {
    case Command::Type::Record: record_playthrough(m, c.player, c.actions, c.seed); break;
    case Command::Type::Purchase: purchase(m, c.player, c.item); break;
    case Command::Type::Place: {
      Assertion a;
      try {
        a = parse_assertion(c.assertion);
      } catch (const ParseError& e) {
        throw RuleViolation(std::string("unparsable assertion: ") + e.what());
      }
      place_assertion(m, c.player, c.trace_id, std::move(a));
      break;
    }
    case Command::Type::Confirm: confirm_done(m, c.player); break;
    case Command::Type::EndPlanning: return end_planning(m);
    case Command::Type::NextRound: next_round(m); break;
    case Command::Type::Forfeit: forfeit(m, c.player); break;
  }
  return std::nullopt;
}

// Canonical text of everything that defines a match state; hashed for
// event-sourcing checks.
inline std::string serialize_match(const MatchState& m) {
  std::ostringstream os;
  os << "round\t" << m.round << "\tphase\t" << phase_name(m.phase) << "\tseed\t" << m.round_seed << "\twinner\t"
     << (m.winner ? *m.winner : -1) << "\n";
  os << "script\t" << script_hash(m.script()) << "\n";
  for (int pl = 0; pl < kPlayers; ++pl) {
    const auto& p = m.players[static_cast<std::size_t>(pl)];
    os << "player\t" << pl << "\t" << p.life << "\t" << p.action_points << "\t" << p.attack << "\t" << p.armour
       << "\t" << p.playthrough_time << "\t" << p.mutant_count_attr << "\t" << p.constructs << "\t"
       << p.recorded_this_phase << "\t" << p.confirmed << "\n";
    os << "traces\t" << join(p.traces, "\t") << "\n";
    for (const auto& a : p.assertions) os << "assertion\t" << a.source_trace << "\t" << serialize(a) << "\n";
  }
  for (const auto& t : m.traces) os << "trace\t" << t.owner << "\t" << t.round << "\t" << fnv1a(serialize_trace(t.trace)) << "\n";
  return os.str();
}

inline std::uint64_t state_hash(const MatchState& m) { return fnv1a(serialize_match(m)); }

inline MatchState replay_commands(const MatchConfig& config, const std::vector<Command>& log) {
  MatchState m = start_match(config);
  for (const auto& c : log) apply_command(m, c);
  return m;
}

// --- execution report wire text ----------------------------------------------

inline std::string report_to_text(const ExecutionReport& r, int player) {
  const auto& pe = r.players[static_cast<std::size_t>(player)];
  std::ostringstream os;
  os << "round\t" << r.round << "\n";
  os << "damage\t" << pe.damage_taken << "\n";
  os << "ap_awarded\t" << pe.action_points_awarded << "\n";
  for (const auto& res : pe.results) {
    os << "mutant\t" << res.mutant.id << "\t" << (res.killed ? "killed" : "survived") << "\t" << res.trace_id << "\t"
       << join(res.mutated, ",") << "\t" << res.killing_assertion.value_or("-") << "\n";
  }
  return os.str();
}

}  // namespace playtest
