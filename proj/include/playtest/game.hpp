#pragma once

// GridTux: the deterministic example game whose behaviour is entirely defined
// by a RuleScript. One Action per tick; ten ticks make one displayed second.

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "playtest/rule_script.hpp"
#include "playtest/util.hpp"

namespace playtest {

inline constexpr int kTicksPerSecond = 10;

struct ActorSpawn {
  ActorKind kind;
  std::int64_t x = 0;
  std::int64_t y = 0;

  bool operator==(const ActorSpawn&) const = default;
};

// Terrain plus initial actor placement. y grows upwards; row 0 is the bottom.
struct LevelLayout {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> solid;  // row-major, index y * width + x
  std::vector<ActorSpawn> actors;

  bool solid_at(std::int64_t x, std::int64_t y) const {
    if (y < 0) return false;  // open pit below the map
    if (y >= height || x < 0 || x >= width) return true;
    return solid[static_cast<std::size_t>(y * width + x)] != 0;
  }

  bool operator==(const LevelLayout&) const = default;
};

// Text form: one row per line, top row first. '.' empty, '#' solid,
// 'P' player spawn, 'C' coin, 'B' bomb, 'G' goal.
inline LevelLayout parse_level(std::string_view text) {
  auto rows = split_lines(text);
  std::vector<std::string> grid;
  for (auto& r : rows) {
    std::string t = trim(r);
    if (!t.empty()) grid.push_back(t);
  }
  if (grid.empty()) throw LayoutError("empty level");
  LevelLayout level;
  level.height = static_cast<int>(grid.size());
  level.width = static_cast<int>(grid.front().size());
  level.solid.assign(static_cast<std::size_t>(level.width * level.height), 0);
  for (int row = 0; row < level.height; ++row) {
    const auto& line = grid[static_cast<std::size_t>(row)];
    if (static_cast<int>(line.size()) != level.width) throw LayoutError("ragged level row " + std::to_string(row));
    int y = level.height - 1 - row;
    for (int x = 0; x < level.width; ++x) {
      char c = line[static_cast<std::size_t>(x)];
      switch (c) {
        case '.': break;
        case '#': level.solid[static_cast<std::size_t>(y * level.width + x)] = 1; break;
        case 'P': level.actors.push_back({ActorKind::Player, x, y}); break;
        case 'C': level.actors.push_back({ActorKind::Coin, x, y}); break;
        case 'B': level.actors.push_back({ActorKind::Bomb, x, y}); break;
        case 'G': level.actors.push_back({ActorKind::Goal, x, y}); break;
        default: throw LayoutError(std::string("unknown level tile '") + c + "'");
      }
    }
  }
  // Actors in kind order, then reading order, so actor ids are stable.
  std::stable_sort(level.actors.begin(), level.actors.end(),
                   [](const ActorSpawn& a, const ActorSpawn& b) { return a.kind < b.kind; });
  return level;
}

inline std::string level_to_text(const LevelLayout& level) {
  std::string out;
  for (int y = level.height - 1; y >= 0; --y) {
    for (int x = 0; x < level.width; ++x) {
      char c = level.solid_at(x, y) ? '#' : '.';
      for (const auto& a : level.actors) {
        if (a.x == x && a.y == y) c = "PCBG"[static_cast<int>(a.kind)];
      }
      out += c;
    }
    out += '\n';
  }
  return out;
}

inline const char* kDefaultLevelText =
    "................................\n"
    "................................\n"
    "................................\n"
    "................................\n"
    "..............C.................\n"
    "................................\n"
    ".PC..C...C.B......C.#...C..B.G..\n"
    "######..########..###.##########\n";

inline const LevelLayout& default_level() {
  static const LevelLayout level = parse_level(kDefaultLevelText);
  return level;
}

struct Actor {
  int id = 0;
  ActorKind kind = ActorKind::Player;
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool alive = true;
  std::int64_t vy = 0;
  std::int64_t dir = 0;

  bool operator==(const Actor&) const = default;
};

struct WorldState {
  std::shared_ptr<const LevelLayout> level;
  std::vector<Actor> actors;
  std::int64_t score = 0;
  bool game_over = false;
  std::int64_t tick = 0;
  std::uint64_t rng_state = 0;

  const Actor& player() const { return actors.front(); }
  Actor& player() { return actors.front(); }

  bool operator==(const WorldState& o) const {
    return *level == *o.level && actors == o.actors && score == o.score && game_over == o.game_over &&
           tick == o.tick && rng_state == o.rng_state;
  }
};

inline std::string serialize_state(const WorldState& s) {
  std::ostringstream os;
  os << "tick\t" << s.tick << "\tscore\t" << s.score << "\tgame_over\t" << s.game_over << "\trng\t"
     << s.rng_state << "\n";
  for (const auto& a : s.actors) {
    os << a.id << '\t' << static_cast<int>(a.kind) << '\t' << a.x << '\t' << a.y << '\t' << a.alive << '\t'
       << a.vy << '\t' << a.dir << '\n';
  }
  return os.str();
}

inline WorldState new_world(const RuleScript& script, const LevelLayout& level, std::uint64_t seed) {
  validate(script);
  if (level.width <= 0 || level.height <= 0 ||
      level.solid.size() != static_cast<std::size_t>(level.width * level.height))
    throw LayoutError("level grid has inconsistent dimensions");
  int players = 0;
  std::set<std::pair<std::int64_t, std::int64_t>> occupied;
  for (const auto& a : level.actors) {
    if (a.x < 0 || a.x >= level.width || a.y < 0 || a.y >= level.height)
      throw LayoutError("actor outside grid bounds");
    if (level.solid_at(a.x, a.y)) throw LayoutError("actor placed inside solid terrain");
    if (!occupied.insert({a.x, a.y}).second) throw LayoutError("overlapping actors");
    if (a.kind == ActorKind::Player) ++players;
  }
  if (players != 1) throw LayoutError("level needs exactly one player spawn");
  if (level.actors.front().kind != ActorKind::Player) throw LayoutError("player spawn must be the first actor");

  WorldState s;
  s.level = std::make_shared<const LevelLayout>(level);
  for (const auto& spawn : level.actors) {
    Actor a;
    a.id = static_cast<int>(s.actors.size());
    a.kind = spawn.kind;
    a.x = spawn.x;
    a.y = spawn.y;
    a.dir = spawn.kind == ActorKind::Bomb ? 1 : 0;
    s.actors.push_back(a);
  }
  s.rng_state = seed;
  return s;
}

namespace detail {

class Interpreter {
 public:
  Interpreter(WorldState& state, Action action) : s_(state), action_(action) {}

  void bind(const Actor* bound) { bound_ = bound; }

  std::int64_t eval(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Literal:
      case Node::Kind::Symbol: return n.value;
      case Node::Kind::Var: return read(n.name);
      case Node::Kind::Arith: {
        auto l = eval(n.children[0]);
        auto r = eval(n.children[1]);
        return n.op == '+' ? l + r : l - r;
      }
      case Node::Kind::Call:
        if (n.name == "solid") return s_.level->solid_at(eval(n.children[0]), eval(n.children[1])) ? 1 : 0;
        if (n.name == "rand") {
          auto bound = eval(n.children[0]);
          if (bound <= 0) return 0;
          SplitMix64 rng(s_.rng_state);
          auto v = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(bound)));
          s_.rng_state = rng.state();
          return v;
        }
        if (n.name == "touching") {
          const Actor* a = actor_for(n.children[0].name);
          const Actor* b = actor_for(n.children[1].name);
          return (a && b && a->alive && b->alive && a->x == b->x && a->y == b->y) ? 1 : 0;
        }
        throw SchemaError("unknown function " + n.name);
      default: return test(n) ? 1 : 0;
    }
  }

  bool test(const Node& n) {
    switch (n.kind) {
      case Node::Kind::True: return true;
      case Node::Kind::Not: return !test(n.children[0]);
      case Node::Kind::And:
        for (const auto& c : n.children) {
          if (!test(c)) return false;
        }
        return true;
      case Node::Kind::Compare: {
        auto l = eval(n.children[0]);
        auto r = eval(n.children[1]);
        if (n.op == '<') return l < r;
        if (n.op == '>') return l > r;
        return l == r;
      }
      default: return eval(n) != 0;
    }
  }

  void apply(const Effect& e) {
    if (e.is_flag()) {
      s_.game_over = true;
      return;
    }
    auto v = eval(e.value);
    if (e.target == "score") {
      s_.score = v;
      return;
    }
    auto dot = e.target.find('.');
    Actor* a = mutable_actor_for(e.target.substr(0, dot));
    if (!a) return;
    auto attr = std::string_view(e.target).substr(dot + 1);
    if (attr == "x") a->x = v;
    else if (attr == "y") a->y = v;
    else if (attr == "alive") a->alive = v != 0;
    else if (attr == "vy") a->vy = v;
    else if (attr == "dir") a->dir = v;
  }

 private:
  const Actor* actor_for(const std::string& kind_name) const {
    if (kind_name == "player") return &s_.player();
    if (bound_ && script_name(bound_->kind) == kind_name) return bound_;
    return nullptr;
  }
  Actor* mutable_actor_for(const std::string& kind_name) {
    const Actor* a = actor_for(kind_name);
    return a ? &s_.actors[static_cast<std::size_t>(a->id)] : nullptr;
  }

  std::int64_t read(const std::string& name) const {
    if (name == "score") return s_.score;
    if (name == "tick") return s_.tick;
    if (name == "action") return static_cast<std::int64_t>(action_);
    if (name == "game_over") return s_.game_over ? 1 : 0;
    auto dot = name.find('.');
    const Actor* a = actor_for(name.substr(0, dot));
    if (!a) return 0;
    auto attr = std::string_view(name).substr(dot + 1);
    if (attr == "x") return a->x;
    if (attr == "y") return a->y;
    if (attr == "alive") return a->alive ? 1 : 0;
    if (attr == "vy") return a->vy;
    if (attr == "dir") return a->dir;
    return 0;
  }

  WorldState& s_;
  Action action_;
  const Actor* bound_ = nullptr;
};

}  // namespace detail

struct StepResult {
  WorldState state;
  std::vector<int> executed;  // statement ids whose guard held, in script order
  std::vector<int> shadow;    // deleted statements whose original guard would have held
};

// Runs one tick: every statement in script order, effects applied as soon as
// the guard holds. Statements bound to an actor kind run once per alive actor.
inline StepResult step(const RuleScript& script, const WorldState& state, Action action) {
  if (state.game_over) throw TerminalStateError("cannot step a finished game");
  StepResult r{state, {}, {}};
  WorldState& s = r.state;
  for (const auto& st : script.statements) {
    auto kind = bound_kind(st);
    std::vector<int> targets;
    if (kind) {
      for (const auto& a : s.actors) {
        if (a.kind == *kind && a.alive) targets.push_back(a.id);
      }
    } else {
      targets.push_back(-1);
    }
    bool fired = false;
    for (int id : targets) {
      if (id >= 0 && !s.actors[static_cast<std::size_t>(id)].alive) continue;
      if (st.deleted) {
        // Shadow evaluation on a scratch copy; must not perturb the real RNG.
        WorldState scratch = s;
        detail::Interpreter shadow(scratch, action);
        shadow.bind(id >= 0 ? &scratch.actors[static_cast<std::size_t>(id)] : nullptr);
        if (shadow.test(st.guard)) fired = true;
        continue;
      }
      detail::Interpreter in(s, action);
      in.bind(id >= 0 ? &s.actors[static_cast<std::size_t>(id)] : nullptr);
      if (in.test(st.guard)) {
        fired = true;
        for (const auto& e : st.effects) in.apply(e);
      }
    }
    if (fired) (st.deleted ? r.shadow : r.executed).push_back(st.id);
  }
  ++s.tick;
  return r;
}

struct ActorView {
  ActorKind kind = ActorKind::Player;
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool alive = true;

  bool operator==(const ActorView&) const = default;
};

struct ObservationFrame {
  std::int64_t tick = 0;
  std::int64_t score = 0;
  bool game_over = false;
  std::vector<ActorView> actors;

  const ActorView& player() const { return actors.front(); }
  bool operator==(const ObservationFrame&) const = default;
};

inline ObservationFrame observe(const WorldState& s) {
  ObservationFrame f;
  f.tick = s.tick;
  f.score = s.score;
  f.game_over = s.game_over;
  f.actors.reserve(s.actors.size());
  for (const auto& a : s.actors) f.actors.push_back({a.kind, a.x, a.y, a.alive});
  return f;
}

struct Trace {
  std::uint64_t script_hash = 0;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  ObservationFrame initial;                 // state before the first action
  std::vector<ObservationFrame> frames;     // frames[t]: state after action t
  std::vector<std::vector<int>> covered;    // statements executed during action t
  std::vector<std::vector<int>> shadow;     // deleted statements whose guard held during action t

  std::size_t length() const { return actions.size(); }
  bool operator==(const Trace&) const = default;
};

// Replays actions from a fresh world. Stops after the first game-over frame.
inline Trace replay(const RuleScript& script, std::uint64_t seed, const std::vector<Action>& actions,
                    const LevelLayout& level = default_level()) {
  Trace t;
  t.script_hash = script_hash(script);
  t.seed = seed;
  WorldState s = new_world(script, level, seed);
  t.initial = observe(s);
  for (Action a : actions) {
    StepResult r = step(script, s, a);
    s = std::move(r.state);
    t.actions.push_back(a);
    t.frames.push_back(observe(s));
    t.covered.push_back(std::move(r.executed));
    t.shadow.push_back(std::move(r.shadow));
    if (s.game_over) break;
  }
  return t;
}

inline double coverage(const std::vector<Trace>& traces, const RuleScript& script) {
  if (script.statements.empty()) return 0.0;
  std::set<int> seen;
  for (const auto& t : traces) {
    for (const auto& step_ids : t.covered) {
      for (int id : step_ids) {
        if (id < 0 || id >= static_cast<int>(script.size()))
          throw IntegrityError("trace covers unknown statement " + std::to_string(id));
        seen.insert(id);
      }
    }
  }
  return static_cast<double>(seen.size()) / static_cast<double>(script.size());
}

// --- trace file format ------------------------------------------------------

namespace detail {

inline void write_frame(std::ostringstream& os, const ObservationFrame& f) {
  os << "F\t" << f.tick << '\t' << f.score << '\t' << (f.game_over ? 1 : 0);
  for (const auto& a : f.actors)
    os << '\t' << static_cast<int>(a.kind) << '\t' << a.x << '\t' << a.y << '\t' << (a.alive ? 1 : 0);
  os << '\n';
}

inline ObservationFrame read_frame(const std::vector<std::string>& f) {
  if (f.empty() || f[0] != "F" || f.size() < 4 || (f.size() - 4) % 4 != 0)
    throw IntegrityError("malformed frame line");
  ObservationFrame frame;
  frame.tick = parse_int(f[1], "tick");
  frame.score = parse_int(f[2], "score");
  frame.game_over = parse_int(f[3], "game_over") != 0;
  for (std::size_t i = 4; i < f.size(); i += 4) {
    auto kind = parse_int(f[i], "actor kind");
    if (kind < 0 || kind > 3) throw IntegrityError("unknown actor kind in frame");
    frame.actors.push_back({static_cast<ActorKind>(kind), parse_int(f[i + 1], "x"), parse_int(f[i + 2], "y"),
                            parse_int(f[i + 3], "alive") != 0});
  }
  return frame;
}

inline void write_ids(std::ostringstream& os, char tag, const std::vector<int>& ids) {
  os << tag;
  for (int id : ids) os << '\t' << id;
  os << '\n';
}

inline std::vector<int> read_ids(const std::vector<std::string>& f, const char* tag) {
  if (f.empty() || f[0] != tag) throw IntegrityError(std::string("expected ") + tag + " line");
  std::vector<int> ids;
  for (std::size_t i = 1; i < f.size(); ++i) ids.push_back(static_cast<int>(parse_int(f[i], "statement id")));
  return ids;
}

}  // namespace detail

inline std::string serialize_trace(const Trace& t) {
  std::ostringstream os;
  os << "TRACE\t" << t.script_hash << '\t' << t.seed << '\t' << t.length() << '\n';
  os << 'A';
  for (Action a : t.actions) os << '\t' << static_cast<int>(a);
  os << '\n';
  detail::write_frame(os, t.initial);
  for (const auto& f : t.frames) detail::write_frame(os, f);
  for (const auto& c : t.covered) detail::write_ids(os, 'C', c);
  bool any_shadow = false;
  for (const auto& s : t.shadow) any_shadow = any_shadow || !s.empty();
  if (any_shadow) {
    for (const auto& s : t.shadow) detail::write_ids(os, 'S', s);
  }
  return os.str();
}

inline Trace parse_trace(std::string_view text) {
  auto lines = split_lines(text);
  std::size_t i = 0;
  auto fields = [&](const char* what) {
    if (i >= lines.size()) throw IntegrityError(std::string("trace truncated before ") + what);
    return split(lines[i++], '\t');
  };
  auto header = fields("header");
  if (header.size() != 4 || header[0] != "TRACE") throw IntegrityError("bad trace header");
  Trace t;
  t.script_hash = parse_u64(header[1], "script hash");
  t.seed = parse_u64(header[2], "seed");
  auto length = static_cast<std::size_t>(parse_u64(header[3], "length"));
  auto actions = fields("actions");
  if (actions.empty() || actions[0] != "A" || actions.size() != length + 1)
    throw IntegrityError("action line does not match trace length");
  for (std::size_t k = 1; k < actions.size(); ++k) {
    auto code = parse_int(actions[k], "action");
    if (code < 0 || code >= static_cast<std::int64_t>(kActionCount)) throw IntegrityError("unknown action code");
    t.actions.push_back(static_cast<Action>(code));
  }
  t.initial = detail::read_frame(fields("initial frame"));
  for (std::size_t k = 0; k < length; ++k) t.frames.push_back(detail::read_frame(fields("frame")));
  for (std::size_t k = 0; k < length; ++k) t.covered.push_back(detail::read_ids(fields("coverage"), "C"));
  if (i < lines.size()) {
    for (std::size_t k = 0; k < length; ++k) t.shadow.push_back(detail::read_ids(fields("shadow"), "S"));
  } else {
    t.shadow.assign(length, {});
  }
  return t;
}

}  // namespace playtest
