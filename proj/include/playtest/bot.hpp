#pragma once

// Bot opponents: solo play and headless matches.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "playtest/assertion.hpp"
#include "playtest/game.hpp"
#include "playtest/match.hpp"

namespace playtest {

enum class BotKind { Random, Greedy };

inline BotKind bot_kind_from_name(std::string_view name) {
  if (name == "random") return BotKind::Random;
  if (name == "greedy") return BotKind::Greedy;
  throw PreconditionError("unknown bot kind '" + std::string(name) + "'");
}

// Shortest action sequence from `start` whose last step collects a coin
// (score increases), avoiding game-over states. Expansion order is shuffled
// by `rng` so equally short paths vary between bots.
inline std::optional<std::vector<Action>> path_to_coin(const RuleScript& script, const WorldState& start,
                                                       std::size_t max_depth, SplitMix64* rng = nullptr) {
  struct Node {
    WorldState state;
    int parent;
    Action action;
    std::size_t depth;
  };
  std::vector<Node> nodes{{start, -1, Action::NoOp, 0}};
  std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> seen;
  seen.insert({start.player().x, start.player().y, start.player().vy});
  std::deque<int> frontier{0};
  while (!frontier.empty()) {
    int idx = frontier.front();
    frontier.pop_front();
    if (nodes[static_cast<std::size_t>(idx)].depth >= max_depth) continue;
    std::array<Action, kActionCount> order = kAllActions;
    if (rng) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng->below(i))]);
    }
    for (Action a : order) {
      const WorldState& from = nodes[static_cast<std::size_t>(idx)].state;
      StepResult r = step(script, from, a);
      if (r.state.game_over) continue;
      bool collected = r.state.score > from.score;
      auto key = std::make_tuple(r.state.player().x, r.state.player().y, r.state.player().vy);
      if (!collected && !seen.insert(key).second) continue;
      nodes.push_back({std::move(r.state), idx, a, nodes[static_cast<std::size_t>(idx)].depth + 1});
      int child = static_cast<int>(nodes.size() - 1);
      if (collected) {
        std::vector<Action> path;
        for (int k = child; nodes[static_cast<std::size_t>(k)].parent >= 0; k = nodes[static_cast<std::size_t>(k)].parent)
          path.push_back(nodes[static_cast<std::size_t>(k)].action);
        std::reverse(path.begin(), path.end());
        return path;
      }
      frontier.push_back(child);
    }
  }
  return std::nullopt;
}

// Chains coin paths until no coin is reachable within the budget.
inline std::vector<Action> coin_seeking_playthrough(const RuleScript& script, const LevelLayout& level,
                                                    std::uint64_t seed, std::size_t budget, SplitMix64* rng = nullptr) {
  std::vector<Action> actions;
  WorldState s = new_world(script, level, seed);
  while (actions.size() < budget) {
    auto path = path_to_coin(script, s, budget - actions.size(), rng);
    if (!path) break;
    for (Action a : *path) {
      s = step(script, s, a).state;
      actions.push_back(a);
    }
  }
  return actions;
}

// Fixed template pool instantiated on one trace: global behaviour checks,
// then position/score snapshots at a few points in time.
inline std::vector<Assertion> template_pool(const Trace& t) {
  std::vector<Assertion> pool;
  pool.push_back(make_assertion(touching(BlockKind::Player, BlockKind::Bomb), Block::make(BlockKind::GameOver)));
  pool.push_back(make_assertion(compare(BlockKind::Player, BlockKind::Y, BlockKind::Less, std::int64_t{0}),
                                Block::make(BlockKind::GameOver)));
  pool.push_back(make_assertion(touching(BlockKind::Player, BlockKind::Coin), Block::make(BlockKind::ScoreIncreases)));
  pool.push_back(make_assertion(touching(BlockKind::Player, BlockKind::Goal), Block::make(BlockKind::GameOver)));
  if (t.length() == 0) return pool;
  const std::size_t n = t.length();
  for (std::size_t step : {n - 1, n / 2, n / 4, (3 * n) / 4}) {
    const auto& f = t.frames[step];
    auto alive = compare(BlockKind::Player, BlockKind::Alive, BlockKind::Equal, std::int64_t{1});
    pool.push_back(make_assertion(alive, attribute_is(BlockKind::Player, BlockKind::X, BlockKind::Equal, f.player().x),
                                  Scope::at(step)));
    pool.push_back(make_assertion(alive, attribute_is(BlockKind::Player, BlockKind::Y, BlockKind::Equal, f.player().y),
                                  Scope::at(step)));
    pool.push_back(make_assertion(alive, attribute_is(BlockKind::Player, BlockKind::Score, BlockKind::Equal, f.score),
                                  Scope::at(step)));
    for (const auto& a : f.actors) {
      if (a.kind == ActorKind::Bomb && a.alive) {
        pool.push_back(make_assertion(alive, attribute_is(BlockKind::Bomb, BlockKind::X, BlockKind::Equal, a.x),
                                      Scope::at(step)));
        break;
      }
    }
  }
  return pool;
}

class Bot {
 public:
  Bot(BotKind kind, std::uint64_t seed) : kind_(kind), rng_(seed) {}

  BotKind kind() const { return kind_; }

  // Next command for `player`, or nothing once the bot has confirmed.
  std::optional<Command> next(const MatchState& m, int player) {
    if (m.phase != Phase::Planning) return std::nullopt;
    const PlayerState& me = m.players[static_cast<std::size_t>(player)];
    if (me.confirmed) return std::nullopt;
    if (m.round != round_) {
      round_ = m.round;
      bought_ = false;
      upgraded_ = false;
    }
    return kind_ == BotKind::Greedy ? greedy(m, player, me) : random(m, player, me);
  }

 private:
  std::optional<Command> greedy(const MatchState& m, int player, const PlayerState& me) {
    if (!me.recorded_this_phase) {
      std::uint64_t seed = rng_.next();
      return Command::record(player, seed,
                             coin_seeking_playthrough(m.script(), m.level(), seed,
                                                      static_cast<std::size_t>(me.playthrough_time), &rng_));
    }
    const int construct = price(m.config, PurchaseItem::Construct);
    if (!bought_ && me.constructs == 0 && me.action_points >= construct) {
      bought_ = true;
      return Command::buy(player, PurchaseItem::Construct);
    }
    if (me.constructs > 0) {
      if (auto c = best_assertion(m, player, me)) return c;
    }
    // Surplus beyond next round's construct goes into one random upgrade.
    if (!upgraded_ && me.action_points >= m.config.upgrade_price + construct) {
      upgraded_ = true;
      static constexpr std::array<PurchaseItem, 3> kUpgrades = {PurchaseItem::Attack, PurchaseItem::Armour,
                                                               PurchaseItem::MutantCount};
      return Command::buy(player, kUpgrades[static_cast<std::size_t>(rng_.below(kUpgrades.size()))]);
    }
    return Command::of(Command::Type::Confirm, player);
  }

  // What an assertion checks, ignoring the expected value.
  static std::string outcome_signature(const Assertion& a) {
    Block outcome = a.root.children.at(1);
    for (auto& c : outcome.children) {
      if (c.kind == BlockKind::Number) c.payload = std::int64_t{0};
    }
    return detail::block_text(outcome);
  }

  // Highest trigger count wins; ties go to the outcome this bot has placed
  // least often, then to pool order.
  std::optional<Command> best_assertion(const MatchState& m, int player, const PlayerState& me) {
    std::map<std::string, int> used;
    for (const auto& b : me.assertions) ++used[outcome_signature(b)];
    std::optional<Command> best;
    std::pair<std::size_t, int> best_key{0, 0};
    for (auto it = me.traces.rbegin(); it != me.traces.rend(); ++it) {
      const Trace& t = m.traces[static_cast<std::size_t>(*it)].trace;
      for (const auto& a : template_pool(t)) {
        bool placed = std::any_of(me.assertions.begin(), me.assertions.end(),
                                  [&](const Assertion& b) { return blocks_equal(a, b); });
        if (placed) continue;
        Verdict v;
        try {
          v = evaluate(a, t);
        } catch (const Error&) {
          continue;
        }
        if (v.status != Verdict::Status::Holds) continue;
        std::pair<std::size_t, int> key{v.triggered_steps.size(), -used[outcome_signature(a)]};
        if (!best || key > best_key) {
          best = Command::place(player, *it, serialize(a));
          best_key = key;
        }
      }
    }
    return best;
  }

  std::optional<Command> random(const MatchState& m, int player, const PlayerState& me) {
    std::vector<Command> candidates;
    if (!me.recorded_this_phase) {
      std::vector<Action> actions(rng_.below(static_cast<std::uint64_t>(me.playthrough_time) + 1));
      for (auto& a : actions) a = kAllActions[static_cast<std::size_t>(rng_.below(kActionCount))];
      candidates.push_back(Command::record(player, rng_.next(), std::move(actions)));
    }
    for (auto item : {PurchaseItem::Construct, PurchaseItem::Attack, PurchaseItem::Armour,
                      PurchaseItem::PlaythroughTime, PurchaseItem::MutantCount})
      candidates.push_back(Command::buy(player, item));
    if (me.constructs > 0 && !me.traces.empty()) {
      int tid = me.traces[static_cast<std::size_t>(rng_.below(me.traces.size()))];
      auto pool = template_pool(m.traces[static_cast<std::size_t>(tid)].trace);
      candidates.push_back(Command::place(player, tid, serialize(pool[static_cast<std::size_t>(rng_.below(pool.size()))])));
    }
    candidates.push_back(Command::of(Command::Type::Confirm, player));

    // Legality filter: keep only commands the engine accepts.
    std::vector<Command> legal;
    for (const auto& c : candidates) {
      if (c.type == Command::Type::Confirm) {
        legal.push_back(c);
        continue;
      }
      MatchState probe = m;
      try {
        apply_command(probe, c);
        legal.push_back(c);
      } catch (const Error&) {
      }
    }
    return legal[static_cast<std::size_t>(rng_.below(legal.size()))];
  }

  BotKind kind_;
  SplitMix64 rng_;
  int round_ = 0;
  bool bought_ = false;
  bool upgraded_ = false;
};

struct BotMatchResult {
  MatchState state;
  std::vector<Command> log;
  std::vector<ExecutionReport> reports;
};

// Headless match: bots alternate commands until both confirm, then the
// Planning Phase ends; repeats until the match is finished.
inline BotMatchResult run_bot_match(const MatchConfig& config, std::array<BotKind, kPlayers> kinds) {
  BotMatchResult out{start_match(config), {}, {}};
  std::array<Bot, kPlayers> bots{Bot(kinds[0], mix_seed(config.match_seed, 101)),
                                 Bot(kinds[1], mix_seed(config.match_seed, 202))};
  auto run = [&](const Command& c) {
    auto report = apply_command(out.state, c);
    out.log.push_back(c);
    if (report) out.reports.push_back(std::move(*report));
  };
  while (out.state.phase != Phase::Finished) {
    if (out.state.phase == Phase::Execution) {
      run(Command::of(Command::Type::NextRound));
      continue;
    }
    for (int guard = 0; guard < 1000 && !both_confirmed(out.state); ++guard) {
      for (int pl = 0; pl < kPlayers; ++pl) {
        if (auto c = bots[static_cast<std::size_t>(pl)].next(out.state, pl)) run(*c);
      }
    }
    run(Command::of(Command::Type::EndPlanning));
  }
  return out;
}

}  // namespace playtest
