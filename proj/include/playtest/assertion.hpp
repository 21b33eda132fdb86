#pragma once

// Block-based assertions.
//
//   <scope> IF <condition> THEN <outcome>
//
//   scope     := GLOBAL | AT <t> | WINDOW <t1> <t2>        (window is [t1, t2))
//   condition := Compare(Attr(<actor>,<attr>), <op>, <value>) | Touching(<actor>, <actor>)
//   outcome   := GameOver | ScoreIncreases | AttributeIs(<actor>, <attr>, <op>, <value>)
//   actor     := Player | Coin | Bomb | Goal      attr := x | y | score | alive
//   op        := < | > | ==                       value := integer | "string"

#include <cctype>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "playtest/game.hpp"
#include "playtest/util.hpp"

namespace playtest {

enum class Category { Construct, Actor, Attribute, Operator, Value, Outcome };

enum class BlockKind {
  IfThen,
  Player,
  Coin,
  Bomb,
  Goal,
  X,
  Y,
  Score,
  Alive,
  Less,
  Greater,
  Equal,
  Touching,
  Number,
  String,
  GameOver,
  ScoreIncreases,
  AttributeIs,
};

inline Category category_of(BlockKind k) {
  switch (k) {
    case BlockKind::IfThen: return Category::Construct;
    case BlockKind::Player:
    case BlockKind::Coin:
    case BlockKind::Bomb:
    case BlockKind::Goal: return Category::Actor;
    case BlockKind::X:
    case BlockKind::Y:
    case BlockKind::Score:
    case BlockKind::Alive: return Category::Attribute;
    case BlockKind::Less:
    case BlockKind::Greater:
    case BlockKind::Equal:
    case BlockKind::Touching: return Category::Operator;
    case BlockKind::Number:
    case BlockKind::String: return Category::Value;
    case BlockKind::GameOver:
    case BlockKind::ScoreIncreases:
    case BlockKind::AttributeIs: return Category::Outcome;
  }
  return Category::Construct;
}

inline std::size_t arity_of(BlockKind k) {
  switch (category_of(k)) {
    case Category::Construct: return 2;
    case Category::Actor: return 0;
    case Category::Attribute: return 1;
    case Category::Operator: return 2;
    case Category::Value: return 0;
    case Category::Outcome: return k == BlockKind::AttributeIs ? 1 : 0;
  }
  return 0;
}

using BlockValue = std::variant<std::int64_t, std::string>;

struct Block {
  Category category = Category::Construct;
  BlockKind kind = BlockKind::IfThen;
  std::vector<Block> children;
  std::optional<BlockValue> payload;

  static Block make(BlockKind k, std::vector<Block> children = {}) {
    Block b;
    b.category = category_of(k);
    b.kind = k;
    b.children = std::move(children);
    return b;
  }
  static Block value(BlockValue v) {
    Block b = make(std::holds_alternative<std::int64_t>(v) ? BlockKind::Number : BlockKind::String);
    b.payload = std::move(v);
    return b;
  }

  bool operator==(const Block&) const = default;
};

struct Scope {
  enum class Kind { AtStep, Window, Global };
  Kind kind = Kind::Global;
  std::size_t from = 0;  // AtStep: the step; Window: first step
  std::size_t to = 0;    // Window: one past the last step

  static Scope global() { return {}; }
  static Scope at(std::size_t t) { return {Kind::AtStep, t, t + 1}; }
  static Scope window(std::size_t a, std::size_t b) { return {Kind::Window, a, b}; }

  bool operator==(const Scope&) const = default;
};

struct Assertion {
  Block root;
  Scope scope;
  int owner = -1;
  int source_trace = -1;

  const Block& condition() const { return root.children[0]; }
  const Block& outcome() const { return root.children[1]; }
};

struct Verdict {
  enum class Status { Holds, Violated, NeverTriggered };
  Status status = Status::NeverTriggered;
  std::optional<std::size_t> violated_at;
  std::vector<std::size_t> triggered_steps;

  bool operator==(const Verdict&) const = default;
};

inline std::string_view status_name(Verdict::Status s) {
  switch (s) {
    case Verdict::Status::Holds: return "Holds";
    case Verdict::Status::Violated: return "Violated";
    case Verdict::Status::NeverTriggered: return "NeverTriggered";
  }
  return "?";
}

// --- names -----------------------------------------------------------------

inline std::string_view block_name(BlockKind k) {
  switch (k) {
    case BlockKind::IfThen: return "IfThen";
    case BlockKind::Player: return "Player";
    case BlockKind::Coin: return "Coin";
    case BlockKind::Bomb: return "Bomb";
    case BlockKind::Goal: return "Goal";
    case BlockKind::X: return "x";
    case BlockKind::Y: return "y";
    case BlockKind::Score: return "score";
    case BlockKind::Alive: return "alive";
    case BlockKind::Less: return "<";
    case BlockKind::Greater: return ">";
    case BlockKind::Equal: return "==";
    case BlockKind::Touching: return "Touching";
    case BlockKind::Number: return "Number";
    case BlockKind::String: return "String";
    case BlockKind::GameOver: return "GameOver";
    case BlockKind::ScoreIncreases: return "ScoreIncreases";
    case BlockKind::AttributeIs: return "AttributeIs";
  }
  return "?";
}

inline ActorKind actor_of(BlockKind k) {
  switch (k) {
    case BlockKind::Coin: return ActorKind::Coin;
    case BlockKind::Bomb: return ActorKind::Bomb;
    case BlockKind::Goal: return ActorKind::Goal;
    default: return ActorKind::Player;
  }
}

inline BlockKind block_of(ActorKind k) {
  switch (k) {
    case ActorKind::Coin: return BlockKind::Coin;
    case ActorKind::Bomb: return BlockKind::Bomb;
    case ActorKind::Goal: return BlockKind::Goal;
    default: return BlockKind::Player;
  }
}

// --- construction helpers --------------------------------------------------

inline Block attr_ref(BlockKind actor, BlockKind attr) { return Block::make(attr, {Block::make(actor)}); }

inline Block compare(BlockKind actor, BlockKind attr, BlockKind op, BlockValue v) {
  return Block::make(op, {attr_ref(actor, attr), Block::value(std::move(v))});
}

inline Block touching(BlockKind a, BlockKind b) {
  return Block::make(BlockKind::Touching, {Block::make(a), Block::make(b)});
}

inline Block attribute_is(BlockKind actor, BlockKind attr, BlockKind op, BlockValue v) {
  return Block::make(BlockKind::AttributeIs, {compare(actor, attr, op, std::move(v))});
}

inline Assertion make_assertion(Block condition, Block outcome, Scope scope = Scope::global()) {
  Assertion a;
  a.root = Block::make(BlockKind::IfThen, {std::move(condition), std::move(outcome)});
  a.scope = scope;
  return a;
}

// --- serialization ---------------------------------------------------------

namespace detail {

inline std::string value_text(const BlockValue& v) {
  if (auto i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  std::string out = "\"";
  for (char c : std::get<std::string>(v)) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string block_text(const Block& b) {
  switch (b.category) {
    case Category::Value: return value_text(*b.payload);
    case Category::Actor: return std::string(block_name(b.kind));
    case Category::Attribute:
      return "Attr(" + std::string(block_name(b.children[0].kind)) + "," + std::string(block_name(b.kind)) + ")";
    case Category::Operator:
      if (b.kind == BlockKind::Touching)
        return "Touching(" + block_text(b.children[0]) + ", " + block_text(b.children[1]) + ")";
      return "Compare(" + block_text(b.children[0]) + ", " + std::string(block_name(b.kind)) + ", " +
             block_text(b.children[1]) + ")";
    case Category::Outcome:
      if (b.kind == BlockKind::AttributeIs) {
        const Block& cmp = b.children[0];
        const Block& attr = cmp.children[0];
        return "AttributeIs(" + std::string(block_name(attr.children[0].kind)) + ", " +
               std::string(block_name(attr.kind)) + ", " + std::string(block_name(cmp.kind)) + ", " +
               block_text(cmp.children[1]) + ")";
      }
      return std::string(block_name(b.kind));
    case Category::Construct:
      return "IF " + block_text(b.children[0]) + " THEN " + block_text(b.children[1]);
  }
  return {};
}

}  // namespace detail

inline std::string scope_text(const Scope& s) {
  switch (s.kind) {
    case Scope::Kind::Global: return "GLOBAL";
    case Scope::Kind::AtStep: return "AT " + std::to_string(s.from);
    case Scope::Kind::Window: return "WINDOW " + std::to_string(s.from) + " " + std::to_string(s.to);
  }
  return {};
}

inline std::string serialize(const Assertion& a) { return scope_text(a.scope) + " " + detail::block_text(a.root); }

// --- parsing ---------------------------------------------------------------

namespace detail {

class AssertionParser {
 public:
  explicit AssertionParser(std::string_view text) : src_(text) {}

  Assertion parse() {
    Assertion a;
    std::string word = ident("scope");
    if (word == "GLOBAL") {
      a.scope = Scope::global();
    } else if (word == "AT") {
      a.scope = Scope::at(index("step"));
    } else if (word == "WINDOW") {
      std::size_t from = index("window start");
      std::size_t to = index("window end");
      if (from > to) fail("window start after end");
      a.scope = Scope::window(from, to);
    } else {
      fail("unknown scope '" + word + "'");
    }
    keyword("IF");
    Block cond = condition();
    keyword("THEN");
    Block out = outcome();
    skip_ws();
    if (pos_ != src_.size()) fail("trailing input");
    a.root = Block::make(BlockKind::IfThen, {std::move(cond), std::move(out)});
    return a;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  std::string ident(const char* what) {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    if (start == pos_) fail(std::string("expected ") + what);
    return std::string(src_.substr(start, pos_ - start));
  }

  void keyword(std::string_view kw) {
    std::size_t at = pos_;
    if (ident(kw.data()) != kw) {
      pos_ = at;
      skip_ws();
      fail("expected " + std::string(kw));
    }
  }

  void punct(char c) {
    skip_ws();
    if (pos_ >= src_.size() || src_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  std::size_t index(const char* what) {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail(std::string("expected ") + what);
    return static_cast<std::size_t>(std::stoull(std::string(src_.substr(start, pos_ - start))));
  }

  BlockKind actor() {
    std::size_t at = pos_;
    std::string name = ident("actor");
    for (auto k : {BlockKind::Player, BlockKind::Coin, BlockKind::Bomb, BlockKind::Goal}) {
      if (block_name(k) == name) return k;
    }
    pos_ = at;
    skip_ws();
    fail("unknown actor '" + name + "'");
  }

  BlockKind attribute() {
    std::size_t at = pos_;
    std::string name = ident("attribute");
    for (auto k : {BlockKind::X, BlockKind::Y, BlockKind::Score, BlockKind::Alive}) {
      if (block_name(k) == name) return k;
    }
    pos_ = at;
    skip_ws();
    fail("unknown attribute '" + name + "'");
  }

  BlockKind relop() {
    skip_ws();
    if (src_.substr(pos_, 2) == "==") {
      pos_ += 2;
      return BlockKind::Equal;
    }
    if (pos_ < src_.size() && src_[pos_] == '<') {
      ++pos_;
      return BlockKind::Less;
    }
    if (pos_ < src_.size() && src_[pos_] == '>') {
      ++pos_;
      return BlockKind::Greater;
    }
    fail("expected operator (<, >, ==)");
  }

  BlockValue value() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '"') {
      ++pos_;
      std::string out;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
        out += src_[pos_++];
      }
      if (pos_ >= src_.size()) fail("unterminated string");
      ++pos_;
      return out;
    }
    std::size_t start = pos_;
    if (pos_ < src_.size() && src_[pos_] == '-') ++pos_;
    std::size_t digits = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (digits == pos_) {
      pos_ = start;
      fail("unparsable value");
    }
    try {
      return static_cast<std::int64_t>(std::stoll(std::string(src_.substr(start, pos_ - start))));
    } catch (const std::out_of_range&) {
      pos_ = start;
      fail("value out of range");
    }
  }

  Block attr_block() {
    keyword("Attr");
    punct('(');
    BlockKind a = actor();
    punct(',');
    BlockKind at = attribute();
    punct(')');
    return attr_ref(a, at);
  }

  Block condition() {
    skip_ws();
    std::size_t at = pos_;
    std::string kind = ident("condition block");
    if (kind == "Compare") {
      punct('(');
      Block attr = attr_block();
      punct(',');
      BlockKind op = relop();
      punct(',');
      BlockValue v = value();
      punct(')');
      return Block::make(op, {std::move(attr), Block::value(std::move(v))});
    }
    if (kind == "Touching") {
      punct('(');
      BlockKind a = actor();
      punct(',');
      BlockKind b = actor();
      punct(')');
      return touching(a, b);
    }
    pos_ = at;
    fail("unknown condition block '" + kind + "'");
  }

  Block outcome() {
    skip_ws();
    std::size_t at = pos_;
    std::string kind = ident("outcome block");
    if (kind == "GameOver") return Block::make(BlockKind::GameOver);
    if (kind == "ScoreIncreases") return Block::make(BlockKind::ScoreIncreases);
    if (kind == "AttributeIs") {
      punct('(');
      BlockKind a = actor();
      punct(',');
      BlockKind attr = attribute();
      punct(',');
      BlockKind op = relop();
      punct(',');
      BlockValue v = value();
      punct(')');
      return attribute_is(a, attr, op, std::move(v));
    }
    pos_ = at;
    fail("unknown outcome block '" + kind + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Assertion parse_assertion(std::string_view text) { return detail::AssertionParser(text).parse(); }

inline std::string canonicalize(std::string_view text) { return serialize(parse_assertion(text)); }

// Structural block-by-block comparison; one mismatching pair makes them differ.
inline bool blocks_equal(const Block& a, const Block& b) {
  if (a.category != b.category || a.kind != b.kind || a.payload != b.payload ||
      a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!blocks_equal(a.children[i], b.children[i])) return false;
  }
  return true;
}

inline bool blocks_equal(const Assertion& a, const Assertion& b) {
  return a.scope == b.scope && blocks_equal(a.root, b.root);
}

inline int construct_cost(BlockKind kind, int if_then_price = 5) {
  return category_of(kind) == Category::Construct ? if_then_price : 0;
}

// --- evaluation ------------------------------------------------------------

namespace detail {

inline bool compare_values(BlockKind op, std::int64_t lhs, const BlockValue& rhs) {
  const auto* r = std::get_if<std::int64_t>(&rhs);
  if (!r) return false;  // attributes are integers; a string never matches
  switch (op) {
    case BlockKind::Less: return lhs < *r;
    case BlockKind::Greater: return lhs > *r;
    default: return lhs == *r;
  }
}

inline bool attribute_holds(const ObservationFrame& f, const Block& cmp) {
  const Block& attr = cmp.children[0];
  ActorKind kind = actor_of(attr.children[0].kind);
  const BlockValue& v = *cmp.children[1].payload;
  for (const auto& a : f.actors) {
    if (a.kind != kind) continue;
    if (attr.kind == BlockKind::Alive) {
      if (compare_values(cmp.kind, a.alive ? 1 : 0, v)) return true;
      continue;
    }
    if (!a.alive) continue;
    std::int64_t value = attr.kind == BlockKind::X ? a.x : attr.kind == BlockKind::Y ? a.y : f.score;
    if (compare_values(cmp.kind, value, v)) return true;
  }
  return false;
}

inline bool condition_holds(const ObservationFrame& f, const Block& cond) {
  if (cond.kind == BlockKind::Touching) {
    ActorKind ka = actor_of(cond.children[0].kind);
    ActorKind kb = actor_of(cond.children[1].kind);
    for (std::size_t i = 0; i < f.actors.size(); ++i) {
      const auto& a = f.actors[i];
      if (a.kind != ka || !a.alive) continue;
      for (std::size_t j = 0; j < f.actors.size(); ++j) {
        const auto& b = f.actors[j];
        if (i != j && b.kind == kb && b.alive && a.x == b.x && a.y == b.y) return true;
      }
    }
    return false;
  }
  return attribute_holds(f, cond);
}

enum class OutcomeResult { Satisfied, Failed, Inconclusive };

// GameOver may land on t or t+1; ScoreIncreases compares t+1 with t. Without a
// successor frame the outcome fails if the game is already over at t and is
// otherwise inconclusive (the recording simply stopped).
inline OutcomeResult outcome_at(const Trace& trace, std::size_t t, const Block& outcome) {
  const auto& now = trace.frames[t];
  bool has_next = t + 1 < trace.frames.size();
  switch (outcome.kind) {
    case BlockKind::GameOver:
      if (now.game_over || (has_next && trace.frames[t + 1].game_over)) return OutcomeResult::Satisfied;
      return has_next ? OutcomeResult::Failed : OutcomeResult::Inconclusive;
    case BlockKind::ScoreIncreases:
      if (has_next) return trace.frames[t + 1].score > now.score ? OutcomeResult::Satisfied : OutcomeResult::Failed;
      return now.game_over ? OutcomeResult::Failed : OutcomeResult::Inconclusive;
    default:
      return attribute_holds(now, outcome.children[0]) ? OutcomeResult::Satisfied : OutcomeResult::Failed;
  }
}

inline void collect_actor_kinds(const Block& b, std::vector<ActorKind>& out) {
  if (b.category == Category::Actor) out.push_back(actor_of(b.kind));
  for (const auto& c : b.children) collect_actor_kinds(c, out);
}

}  // namespace detail

enum class ScopePolicy {
  Strict,  // out-of-range scope is a precondition error
  Clamp,   // out-of-range steps are simply not evaluated (mutant replays may be shorter)
};

inline Verdict evaluate(const Assertion& a, const Trace& trace, ScopePolicy policy = ScopePolicy::Strict) {
  const std::size_t len = trace.length();
  std::vector<ActorKind> kinds;
  detail::collect_actor_kinds(a.root, kinds);
  for (auto k : kinds) {
    bool present = false;
    for (const auto& actor : trace.initial.actors) present = present || actor.kind == k;
    if (!present) throw SchemaError("assertion references actor '" + std::string(block_name(block_of(k))) +
                                    "' absent from the trace");
  }

  std::size_t from = 0;
  std::size_t to = len;
  if (a.scope.kind != Scope::Kind::Global) {
    from = a.scope.from;
    to = a.scope.to;
    bool out_of_range = a.scope.kind == Scope::Kind::AtStep ? from >= len : (from > to || to > len);
    if (out_of_range) {
      if (policy == ScopePolicy::Strict)
        throw PreconditionError("assertion scope " + scope_text(a.scope) + " exceeds trace length " +
                                std::to_string(len));
      to = std::min(to, len);
      from = std::min(from, to);
    }
  }

  Verdict v;
  for (std::size_t t = from; t < to; ++t) {
    if (!detail::condition_holds(trace.frames[t], a.condition())) continue;
    auto result = detail::outcome_at(trace, t, a.outcome());
    if (result == detail::OutcomeResult::Inconclusive) continue;
    v.triggered_steps.push_back(t);
    if (result == detail::OutcomeResult::Failed && !v.violated_at) v.violated_at = t;
  }
  if (v.violated_at) v.status = Verdict::Status::Violated;
  else if (v.triggered_steps.empty()) v.status = Verdict::Status::NeverTriggered;
  else v.status = Verdict::Status::Holds;
  return v;
}

}  // namespace playtest
