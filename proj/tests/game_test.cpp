#include <gtest/gtest.h>

#include "playtest/game.hpp"

using namespace playtest;

namespace {

std::vector<Action> random_actions(SplitMix64& rng, std::size_t n) {
  std::vector<Action> out(n);
  for (auto& a : out) a = kAllActions[static_cast<std::size_t>(rng.below(kActionCount))];
  return out;
}

const Actor* actor_at(const WorldState& s, ActorKind kind, std::int64_t x, std::int64_t y) {
  for (const auto& a : s.actors) {
    if (a.kind == kind && a.x == x && a.y == y) return &a;
  }
  return nullptr;
}

}  // namespace

TEST(Level, DefaultLevelShape) {
  const auto& lv = default_level();
  EXPECT_EQ(lv.width, 32);
  EXPECT_EQ(lv.height, 8);
  EXPECT_TRUE(lv.solid_at(0, 0));
  EXPECT_FALSE(lv.solid_at(6, 0));  // hole
  EXPECT_FALSE(lv.solid_at(6, -1));
  EXPECT_TRUE(lv.solid_at(-1, 3));
  EXPECT_TRUE(lv.solid_at(3, 8));
  EXPECT_EQ(parse_level(level_to_text(lv)), lv);
}

TEST(Level, BadLayoutsRejected) {
  const auto& script = default_script();
  EXPECT_THROW(new_world(script, parse_level("....\n####\n"), 0), LayoutError);    // no player
  EXPECT_THROW(new_world(script, parse_level("PP..\n####\n"), 0), LayoutError);    // two players
  EXPECT_THROW(parse_level("P..\n####\n"), LayoutError);                          // ragged
  EXPECT_THROW(parse_level("P.x.\n####\n"), LayoutError);                         // unknown tile
  LevelLayout lv = parse_level("P...\n####\n");
  lv.actors.push_back({ActorKind::Coin, 0, 0});  // inside terrain
  EXPECT_THROW(new_world(script, lv, 0), LayoutError);
  lv.actors.back() = {ActorKind::Coin, 9, 1};  // out of bounds
  EXPECT_THROW(new_world(script, lv, 0), LayoutError);
  lv.actors.back() = {ActorKind::Coin, 0, 1};  // on the player
  EXPECT_THROW(new_world(script, lv, 0), LayoutError);
}

TEST(World, InitialState) {
  WorldState s = new_world(default_script(), default_level(), 0);
  EXPECT_EQ(s.player().x, 1);
  EXPECT_EQ(s.player().y, 1);
  EXPECT_EQ(s.score, 0);
  EXPECT_FALSE(s.game_over);
  EXPECT_EQ(s.tick, 0);
  EXPECT_EQ(new_world(default_script(), default_level(), 0), s);
}

TEST(World, SeedsDifferOnlyInRngState) {
  WorldState a = new_world(default_script(), default_level(), 7);
  WorldState b = new_world(default_script(), default_level(), 8);
  EXPECT_NE(a.rng_state, b.rng_state);
  b.rng_state = a.rng_state;
  EXPECT_EQ(a, b);
}

TEST(Step, MovingOntoCoinCollectsIt) {
  WorldState s = new_world(default_script(), default_level(), 0);
  ASSERT_NE(actor_at(s, ActorKind::Coin, 2, 1), nullptr);
  s = step(default_script(), s, Action::Right).state;
  EXPECT_EQ(s.player().x, 2);
  auto r = step(default_script(), s, Action::NoOp);
  EXPECT_EQ(r.state.score, 10);
  EXPECT_FALSE(actor_at(r.state, ActorKind::Coin, 2, 1)->alive);
  EXPECT_NE(std::find(r.executed.begin(), r.executed.end(), stmt::kCoin), r.executed.end());
}

TEST(Step, FallingIntoHoleEndsGame) {
  Trace t = replay(default_script(), 0, actions_from_letters("RRRRRNNNNNNNN"));
  ASSERT_TRUE(t.frames.back().game_over);
  bool below = false;
  for (const auto& f : t.frames) below = below || f.player().y < 0;
  EXPECT_TRUE(below);
  EXPECT_LT(t.length(), 13u);  // truncated at the game-over frame
}

TEST(Step, NoOpWhileStandingKeepsPlayer) {
  WorldState s = new_world(default_script(), default_level(), 3);
  auto r = step(default_script(), s, Action::NoOp);
  EXPECT_EQ(r.state.player(), s.player());
  EXPECT_EQ(r.state.tick, s.tick + 1);
  EXPECT_EQ(r.state.score, s.score);
}

TEST(Step, JumpRisesThenFalls) {
  WorldState s = new_world(default_script(), default_level(), 0);
  std::vector<std::int64_t> ys;
  s = step(default_script(), s, Action::Jump).state;
  for (int i = 0; i < 8; ++i) {
    ys.push_back(s.player().y);
    s = step(default_script(), s, Action::NoOp).state;
  }
  EXPECT_EQ(*std::max_element(ys.begin(), ys.end()), 3);
  EXPECT_EQ(s.player().y, 1);
}

TEST(Step, FinishedGameCannotStep) {
  Trace t = replay(default_script(), 0, actions_from_letters("RRRRRNNNNNNNN"));
  WorldState s = new_world(default_script(), default_level(), 0);
  for (Action a : t.actions) s = step(default_script(), s, a).state;
  ASSERT_TRUE(s.game_over);
  EXPECT_THROW(step(default_script(), s, Action::NoOp), TerminalStateError);
}

TEST(Step, DeletedStatementRecordsShadowWithoutEffect) {
  RuleScript sd = default_script();
  sd.statements[stmt::kCoin].deleted = true;
  Trace t = replay(sd, 0, actions_from_letters("RN"));
  EXPECT_EQ(t.frames.back().score, 0);
  EXPECT_EQ(t.shadow[1], std::vector<int>{stmt::kCoin});
  EXPECT_TRUE(std::find(t.covered[1].begin(), t.covered[1].end(), stmt::kCoin) == t.covered[1].end());
}

TEST(Step, ShadowEvaluationLeavesRngUntouched) {
  // Deleting the random bomb flip must not change the rng sequence seen by
  // the remaining statements, so bombs evolve exactly as with the flip never firing.
  RuleScript sd = default_script();
  sd.statements[stmt::kBombFlipRandom].deleted = true;
  WorldState a = new_world(sd, default_level(), 11);
  auto r = step(sd, a, Action::NoOp);
  EXPECT_EQ(r.state.rng_state, a.rng_state);
}

TEST(Replay, EmptyActions) {
  Trace t = replay(default_script(), 5, {});
  EXPECT_EQ(t.length(), 0u);
  EXPECT_TRUE(t.frames.empty());
  EXPECT_EQ(t.initial.player().x, 1);
}

TEST(Replay, DeterministicBytes) {
  SplitMix64 rng(99);
  for (int i = 0; i < 50; ++i) {
    auto actions = random_actions(rng, rng.below(120));
    std::uint64_t seed = rng.next();
    EXPECT_EQ(serialize_trace(replay(default_script(), seed, actions)),
              serialize_trace(replay(default_script(), seed, actions)));
  }
}

TEST(Replay, NoFrameAfterGameOver) {
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    Trace t = replay(default_script(), rng.next(), random_actions(rng, 150));
    for (std::size_t k = 0; k + 1 < t.frames.size(); ++k) EXPECT_FALSE(t.frames[k].game_over);
  }
}

TEST(Replay, CoinRunCoversCoinStatementAtCollectionStep) {
  Trace t = replay(default_script(), 0, actions_from_letters("RN"));
  ASSERT_EQ(t.length(), 2u);
  EXPECT_EQ(t.frames[1].score, 10);
  auto& c = t.covered[1];
  EXPECT_NE(std::find(c.begin(), c.end(), stmt::kCoin), c.end());
  EXPECT_EQ(std::find(t.covered[0].begin(), t.covered[0].end(), stmt::kCoin), t.covered[0].end());
}

TEST(TraceFormat, RoundTrip) {
  SplitMix64 rng(17);
  for (int i = 0; i < 20; ++i) {
    RuleScript sd = default_script();
    sd.statements[rng.below(sd.size())].deleted = true;
    Trace t = replay(sd, rng.next(), random_actions(rng, 60));
    EXPECT_EQ(parse_trace(serialize_trace(t)), t);
  }
}

TEST(TraceFormat, CorruptInputRejected) {
  Trace t = replay(default_script(), 0, actions_from_letters("RRJ"));
  std::string text = serialize_trace(t);
  EXPECT_THROW(parse_trace(""), Error);
  EXPECT_THROW(parse_trace(text.substr(0, text.size() / 2)), Error);
}

TEST(Coverage, Basics) {
  EXPECT_EQ(coverage({}, default_script()), 0.0);

  // Idle play: the player never moves, so only bomb statements can run.
  Trace idle = replay(default_script(), 2, std::vector<Action>(60, Action::NoOp));
  std::set<int> ids;
  for (const auto& c : idle.covered) ids.insert(c.begin(), c.end());
  for (int id : ids) EXPECT_GE(id, 10) << "idle trace ran statement " << id;
  EXPECT_TRUE(ids.count(13));
  EXPECT_DOUBLE_EQ(coverage({idle}, default_script()), static_cast<double>(ids.size()) / 14.0);
}

TEST(Coverage, FullUnionIsOne) {
  RuleScript tiny = parse_script("0: IF action == Left THEN score = score + 1\n1: IF action == Right THEN score = score + 2\n");
  Trace t = replay(tiny, 0, actions_from_letters("LR"), parse_level("P.\n##\n"));
  EXPECT_DOUBLE_EQ(coverage({t}, tiny), 1.0);
}

TEST(Coverage, UnknownStatementIdRejected) {
  Trace t = replay(default_script(), 0, actions_from_letters("R"));
  t.covered[0].push_back(99);
  EXPECT_THROW(coverage({t}, default_script()), IntegrityError);
}

TEST(Coverage, MonotoneUnderAddingTraces) {
  SplitMix64 rng(8);
  std::vector<Trace> set;
  double prev = 0.0;
  for (int i = 0; i < 30; ++i) {
    set.push_back(replay(default_script(), rng.next(), random_actions(rng, 80)));
    double c = coverage(set, default_script());
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(ScriptOrder, IndependentStatementsCommute) {
  // Gravity (player.y, player.vy) and the random bomb flip (rng, bomb.dir)
  // touch disjoint state; swapping them changes only statement ids.
  auto lines = split_lines(to_text(default_script()));
  std::string swapped;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::size_t src = i == 9 ? 10 : i == 10 ? 9 : i;
    std::string body = lines[src].substr(lines[src].find(':'));
    swapped += std::to_string(i) + body + "\n";
  }
  RuleScript perm = parse_script(swapped);
  SplitMix64 rng(21);
  for (int k = 0; k < 30; ++k) {
    auto actions = random_actions(rng, 100);
    std::uint64_t seed = rng.next();
    Trace a = replay(default_script(), seed, actions);
    Trace b = replay(perm, seed, actions);
    EXPECT_EQ(a.frames, b.frames);
  }
}

TEST(ScriptOrder, DependentStatementsDoNotCommute) {
  const LevelLayout lv = parse_level("P.\n##\n");
  RuleScript ab = parse_script("0: IF TRUE THEN score = score + 1\n1: IF score == 1 THEN score = score + 10\n");
  RuleScript ba = parse_script("0: IF score == 1 THEN score = score + 10\n1: IF TRUE THEN score = score + 1\n");
  EXPECT_EQ(replay(ab, 0, {Action::NoOp}, lv).frames[0].score, 11);
  EXPECT_EQ(replay(ba, 0, {Action::NoOp}, lv).frames[0].score, 1);
}
