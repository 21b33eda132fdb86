#include <gtest/gtest.h>

#include <set>

#include "playtest/assertion.hpp"
#include "playtest/mutation.hpp"

using namespace playtest;

namespace {

std::vector<Action> random_actions(SplitMix64& rng, std::size_t n) {
  std::vector<Action> out(n);
  for (auto& a : out) a = kAllActions[static_cast<std::size_t>(rng.below(kActionCount))];
  return out;
}

bool touches_bomb(const ObservationFrame& f) {
  for (const auto& b : f.actors) {
    if (b.kind == ActorKind::Bomb && b.alive && b.x == f.player().x && b.y == f.player().y) return true;
  }
  return false;
}

// First seeded random playthrough that ends by walking into a bomb.
std::pair<std::uint64_t, std::vector<Action>> bomb_death() {
  SplitMix64 rng(77);
  for (;;) {
    std::uint64_t seed = rng.next();
    // Mostly rightward walks with jumps reach the first bomb quickly.
    std::vector<Action> actions;
    for (int i = 0; i < 60; ++i) actions.push_back(rng.below(3) ? Action::Right : kAllActions[rng.below(4)]);
    Trace t = replay(default_script(), seed, actions);
    if (t.frames.back().game_over && touches_bomb(t.frames.back())) return {seed, t.actions};
  }
}

std::size_t count_lines_differing(const std::string& a, const std::string& b) {
  auto la = split_lines(a), lb = split_lines(b);
  EXPECT_EQ(la.size(), lb.size());
  std::size_t diff = 0;
  for (std::size_t i = 0; i < std::min(la.size(), lb.size()); ++i) diff += la[i] != lb[i];
  return diff;
}

}  // namespace

TEST(Enumerate, SingleStatementByHand) {
  RuleScript s = parse_script("0: IF player.y < 0 THEN game_over\n");
  std::set<std::string> expected = {
      "0: IF player.y > 0 THEN game_over",  "0: IF player.y == 0 THEN game_over",
      "0: IF player.y < -1 THEN game_over", "0: IF player.y < 1 THEN game_over",
      "0: IF NOT (player.y < 0) THEN game_over", "0: NOP",
  };
  auto mutants = enumerate_mutants(s);
  std::set<std::string> got;
  for (const auto& m : mutants) got.insert(to_text(apply(s, m).statements[0]));
  EXPECT_EQ(got, expected);
  EXPECT_EQ(mutants.size(), 6u);
}

TEST(Enumerate, EmptyScript) { EXPECT_TRUE(enumerate_mutants(RuleScript{}).empty()); }

TEST(Enumerate, DeterministicWithSequentialIds) {
  auto a = enumerate_mutants(default_script());
  auto b = enumerate_mutants(default_script());
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, static_cast<int>(i));
}

TEST(Enumerate, OrderedByStatementThenOperator) {
  auto ms = enumerate_mutants(default_script());
  for (std::size_t i = 1; i < ms.size(); ++i) {
    auto key = [](const Mutant& m) { return std::make_pair(m.target_statement, static_cast<int>(m.op)); };
    EXPECT_LE(key(ms[i - 1]), key(ms[i]));
  }
}

TEST(Enumerate, CountMatchesPerNodeFormula) {
  // ROR: 2 per comparison, AOR: 1 per +/-, CR: 2 for a literal in {-1, 0, 1},
  // else 3, plus NEG and SD per statement.
  std::size_t expected = 0;
  std::set<std::string> texts;
  for (const auto& s : default_script().statements) {
    for_each_node(s, [&](const Node& n, int) {
      if (n.kind == Node::Kind::Compare) expected += 2;
      if (n.kind == Node::Kind::Arith) expected += 1;
      if (n.kind == Node::Kind::Literal) expected += n.value == 0 || n.value == 1 || n.value == -1 ? 2 : 3;
    });
    expected += 2;
  }
  auto ms = enumerate_mutants(default_script());
  for (const auto& m : ms) texts.insert(to_text(apply(default_script(), m)));
  EXPECT_EQ(texts.size(), ms.size()) << "duplicate mutant texts";
  EXPECT_EQ(ms.size(), expected);
}

TEST(Enumerate, FirstOrderProperty) {
  const std::string original = to_text(default_script());
  for (const auto& m : enumerate_mutants(default_script())) {
    std::string mutated = to_text(apply(default_script(), m));
    EXPECT_EQ(count_lines_differing(original, mutated), 1u) << to_descriptor(m);
    auto lines = split_lines(mutated);
    EXPECT_EQ(lines[static_cast<std::size_t>(m.target_statement)],
              to_text(apply(default_script(), m).statements[static_cast<std::size_t>(m.target_statement)]));
  }
}

TEST(Select, SameForBothPlayers) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto a = select_round_mutants(default_script(), 9, seed);
    auto b = select_round_mutants(default_script(), 9, seed);
    EXPECT_EQ(a, b);
  }
}

TEST(Select, SeedsChangeTheSample) {
  auto a = select_round_mutants(default_script(), 20, 1);
  auto b = select_round_mutants(default_script(), 20, 2);
  EXPECT_NE(a, b);
}

TEST(Select, SizesAndPrefixes) {
  EXPECT_TRUE(select_round_mutants(default_script(), 0, 3).empty());
  auto all = enumerate_mutants(default_script());
  auto big = select_round_mutants(default_script(), all.size() + 50, 3);
  EXPECT_EQ(big.size(), all.size());
  auto small = select_round_mutants(default_script(), 7, 3);
  EXPECT_TRUE(std::equal(small.begin(), small.end(), big.begin()));
  std::set<int> ids;
  for (const auto& m : big) ids.insert(m.id);
  EXPECT_EQ(ids.size(), all.size());
}

TEST(Apply, DeletingBombStatementRemovesDeath) {
  auto [seed, actions] = bomb_death();
  Mutant sd{0, MutationOperator::SD, stmt::kBombTouch, {}};
  RuleScript ms = apply(default_script(), sd);
  EXPECT_EQ(to_text(ms.statements[0]), "0: NOP");
  Trace t = replay(ms, seed, actions);
  EXPECT_EQ(t.length(), actions.size());
  bool touched = false;
  for (const auto& f : t.frames) touched = touched || touches_bomb(f);
  EXPECT_TRUE(touched);
}

TEST(Apply, RorOnHoleFiresAboveGround) {
  Mutant m{0, MutationOperator::ROR, stmt::kHole, {0, "<", ">"}};
  RuleScript ms = apply(default_script(), m);
  EXPECT_EQ(to_text(ms.statements[1]), "1: IF player.y > 0 THEN game_over");
  Trace t = replay(ms, 0, actions_from_letters("NNN"));
  EXPECT_EQ(t.length(), 1u);
  EXPECT_TRUE(t.frames[0].game_over);
}

TEST(Apply, RevertRestoresOriginal) {
  for (const auto& m : enumerate_mutants(default_script())) {
    if (m.op == MutationOperator::SD) continue;
    Mutant back = m;
    std::swap(back.detail.from, back.detail.to);
    RuleScript twice = apply(apply(default_script(), m), back);
    EXPECT_EQ(to_text(twice), to_text(default_script())) << to_descriptor(m);
  }
}

TEST(Apply, StaleMutantsRejected) {
  EXPECT_THROW(apply(default_script(), Mutant{0, MutationOperator::SD, 99, {}}), IntegrityError);
  EXPECT_THROW(apply(default_script(), Mutant{0, MutationOperator::ROR, stmt::kHole, {0, ">", "<"}}), IntegrityError);
  EXPECT_THROW(apply(default_script(), Mutant{0, MutationOperator::CR, stmt::kHole, {2, "5", "6"}}), IntegrityError);
  EXPECT_THROW(apply(default_script(), Mutant{0, MutationOperator::AOR, stmt::kHole, {40, "+", "-"}}), IntegrityError);
  RuleScript gone = default_script();
  gone.statements[3].deleted = true;
  EXPECT_THROW(apply(gone, Mutant{0, MutationOperator::NEG, 3, {}}), IntegrityError);
}

TEST(Descriptor, RoundTrip) {
  for (const auto& m : enumerate_mutants(default_script())) EXPECT_EQ(parse_descriptor(to_descriptor(m)), m);
  EXPECT_EQ(to_descriptor(Mutant{4, MutationOperator::CR, 2, {6, "10", "9"}}), "4\tCR\t2\tnode=6 from=10 to=9");
  EXPECT_THROW(parse_descriptor("1\tXYZ\t2\tguard"), IntegrityError);
  EXPECT_THROW(parse_descriptor("1\tCR\t2"), IntegrityError);
}

TEST(MutatedSteps, UnreachedIsEmpty) {
  Mutant cr{0, MutationOperator::CR, stmt::kGoal, {6, "50", "49"}};
  Trace t = replay(apply(default_script(), cr), 0, actions_from_letters("LLNN"));
  EXPECT_TRUE(mutated_steps(t, cr).empty());
}

TEST(MutatedSteps, HoleRorCoversEveryStep) {
  Mutant m{0, MutationOperator::ROR, stmt::kHole, {0, "<", ">"}};
  Trace t = replay(apply(default_script(), m), 0, actions_from_letters("JNNN"));
  std::vector<std::size_t> all(t.length());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_EQ(mutated_steps(t, m), all);
}

TEST(MutatedSteps, DeletedBombGuardMatchesTouchFrames) {
  auto [seed, actions] = bomb_death();
  Mutant sd{0, MutationOperator::SD, stmt::kBombTouch, {}};
  Trace t = replay(apply(default_script(), sd), seed, actions);
  std::vector<std::size_t> want;
  for (std::size_t k = 0; k < t.length(); ++k) {
    const auto& before = k == 0 ? t.initial : t.frames[k - 1];
    if (touches_bomb(before)) want.push_back(k);
  }
  EXPECT_FALSE(want.empty());
  EXPECT_EQ(mutated_steps(t, sd), want);
}

TEST(KillConsistency, KillsImplyDifferentReplays) {
  std::vector<Assertion> oracles = {
      parse_assertion("GLOBAL IF Touching(Player, Bomb) THEN GameOver"),
      parse_assertion("GLOBAL IF Compare(Attr(Player,y), <, 0) THEN GameOver"),
      parse_assertion("GLOBAL IF Touching(Player, Coin) THEN ScoreIncreases"),
  };
  auto mutants = enumerate_mutants(default_script());
  SplitMix64 rng(12);
  int kills = 0;
  for (int i = 0; i < 150; ++i) {
    const Mutant& m = mutants[rng.below(mutants.size())];
    std::uint64_t seed = rng.next();
    auto actions = random_actions(rng, 40 + rng.below(60));
    Trace orig = replay(default_script(), seed, actions);
    Trace mut = replay(apply(default_script(), m), seed, actions);
    for (const auto& a : oracles) {
      if (evaluate(a, orig).status == Verdict::Status::Violated) continue;
      if (evaluate(a, mut, ScopePolicy::Clamp).status != Verdict::Status::Violated) continue;
      ++kills;
      EXPECT_NE(mut.frames, orig.frames) << to_descriptor(m);
    }
  }
  EXPECT_GT(kills, 0);
}
