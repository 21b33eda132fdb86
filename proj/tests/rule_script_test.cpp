#include <gtest/gtest.h>

#include "playtest/rule_script.hpp"

using namespace playtest;

TEST(RuleScript, DefaultScriptHasFourteenStatements) {
  const auto& s = default_script();
  ASSERT_EQ(s.size(), 14u);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.statements[i].id, static_cast<int>(i));
}

TEST(RuleScript, CanonicalTextRoundTrips) {
  const auto& s = default_script();
  std::string text = to_text(s);
  RuleScript again = parse_script(text);
  EXPECT_EQ(again, s);
  EXPECT_EQ(to_text(again), text);
  EXPECT_EQ(script_hash(again), script_hash(s));
}

TEST(RuleScript, CanonicalTextMatchesSourceLines) {
  auto lines = split_lines(kDefaultScriptText);
  const auto& s = default_script();
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(to_text(s.statements[i]), lines[i]);
}

TEST(RuleScript, DeletedStatementPrintsAsNop) {
  RuleScript s = default_script();
  s.statements[stmt::kCoin].deleted = true;
  EXPECT_EQ(to_text(s.statements[stmt::kCoin]), "2: NOP");
  EXPECT_NE(script_hash(s), script_hash(default_script()));
}

TEST(RuleScript, CommentsAndBlankLinesIgnored) {
  auto s = parse_script("# header\n\n0: IF player.y < 0 THEN game_over\n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(to_text(s), "0: IF player.y < 0 THEN game_over\n");
}

TEST(RuleScript, NonContiguousIdsRejected) {
  EXPECT_THROW(parse_script("0: IF TRUE THEN score = 1\n2: IF TRUE THEN score = 2\n"), Error);
}

TEST(RuleScript, SyntaxErrorCarriesPosition) {
  try {
    parse_script("0: IF player.y < THEN game_over\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.position(), 0u);
  }
}

TEST(RuleScript, UnknownVariableRejected) {
  EXPECT_THROW(parse_script("0: IF player.z < 0 THEN game_over\n"), SchemaError);
  EXPECT_THROW(parse_script("0: IF TRUE THEN coin.vy = 1\n"), SchemaError);
}

TEST(RuleScript, UnknownFunctionRejected) {
  EXPECT_THROW(parse_script("0: IF teleport(1, 2) == 0 THEN game_over\n"), SchemaError);
}

TEST(RuleScript, TwoBoundKindsRejected) {
  EXPECT_THROW(parse_script("0: IF coin.x == bomb.x THEN game_over\n"), SchemaError);
}

TEST(RuleScript, BoundKindOfStatements) {
  const auto& s = default_script();
  EXPECT_EQ(bound_kind(s.statements[stmt::kCoin]), ActorKind::Coin);
  EXPECT_EQ(bound_kind(s.statements[stmt::kBombTouch]), ActorKind::Bomb);
  EXPECT_EQ(bound_kind(s.statements[13]), ActorKind::Bomb);
  EXPECT_EQ(bound_kind(s.statements[stmt::kGravity]), std::nullopt);
  EXPECT_EQ(bound_kind(s.statements[stmt::kMoveLeft]), std::nullopt);
}

TEST(RuleScript, BareCallGuardIsTruthyAtom) {
  const auto& g = default_script().statements[stmt::kBombTouch].guard;
  EXPECT_EQ(g.kind, Node::Kind::Call);
  EXPECT_EQ(g.name, "touching");
}

TEST(RuleScript, NodeIndexingIsPreorder) {
  RuleStatement s = default_script().statements[stmt::kHole];  // IF player.y < 0 THEN game_over
  std::vector<std::pair<int, Node::Kind>> seen;
  for_each_node(s, [&](const Node& n, int i) { seen.emplace_back(i, n.kind); });
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[0].second, Node::Kind::Compare);
  EXPECT_EQ(seen[1].second, Node::Kind::Var);
  EXPECT_EQ(seen[2].second, Node::Kind::Literal);
  for (auto [i, kind] : seen) {
    Node* n = node_at(s, i);
    ASSERT_NE(n, nullptr);
    EXPECT_EQ(n->kind, kind);
  }
  EXPECT_EQ(node_at(s, 3), nullptr);
}

TEST(RuleScript, EffectValuesAreIndexedAfterGuard) {
  RuleStatement s = default_script().statements[stmt::kCoin];
  // guard: touching(player, coin) -> Call, ActorRef, ActorRef; then 0; then score + 10
  int count = 0;
  for_each_node(s, [&](const Node&, int) { ++count; });
  EXPECT_EQ(count, 7);
  EXPECT_EQ(node_at(s, 3)->kind, Node::Kind::Literal);
  EXPECT_EQ(node_at(s, 3)->value, 0);
  EXPECT_EQ(node_at(s, 6)->value, 10);
}

TEST(RuleScript, ActionLettersRoundTrip) {
  std::vector<Action> all{Action::Left, Action::Right, Action::Jump, Action::NoOp};
  EXPECT_EQ(actions_to_letters(all), "LRJN");
  EXPECT_EQ(actions_from_letters("LRJN"), all);
  EXPECT_THROW(actions_from_letters("LX"), Error);
}

TEST(RuleScript, NotGuardRoundTrips) {
  auto s = parse_script("0: IF NOT (player.y < 0 AND player.x == 1) THEN game_over\n");
  EXPECT_EQ(parse_script(to_text(s)), s);
  EXPECT_EQ(s.statements[0].guard.kind, Node::Kind::Not);
}
