#pragma once

// RuleScript: the interpretable program that defines the example game.
//
// Canonical text form, one statement per line:
//
//   <id>: IF <guard> THEN <effect>[; <effect>...]
//   <id>: NOP                       (a deleted statement)
//
// Guards are conjunctions of comparisons (`<`, `>`, `==`) over integer
// expressions, optionally wrapped in `NOT (...)`. Expressions use `+`/`-`,
// integer literals, world variables (`score`, `tick`, `action`,
// `player.x`, `coin.alive`, ...), action symbols (`Left`, `Right`, `Jump`,
// `NoOp`) and the builtins `solid(x, y)`, `touching(kind, kind)`, `rand(n)`.
// A statement that mentions a non-player actor kind is evaluated once per
// alive actor of that kind.

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "playtest/util.hpp"

namespace playtest {

enum class ActorKind { Player = 0, Coin = 1, Bomb = 2, Goal = 3 };

inline constexpr std::array<ActorKind, 4> kAllActorKinds = {ActorKind::Player, ActorKind::Coin,
                                                           ActorKind::Bomb, ActorKind::Goal};

inline std::string_view script_name(ActorKind k) {
  switch (k) {
    case ActorKind::Player: return "player";
    case ActorKind::Coin: return "coin";
    case ActorKind::Bomb: return "bomb";
    case ActorKind::Goal: return "goal";
  }
  return "?";
}

inline std::optional<ActorKind> actor_kind_from_script(std::string_view name) {
  for (auto k : kAllActorKinds) {
    if (script_name(k) == name) return k;
  }
  return std::nullopt;
}

// Attributes each actor kind declares.
inline bool kind_has_attribute(ActorKind k, std::string_view attr) {
  if (attr == "x" || attr == "y" || attr == "alive") return true;
  if (attr == "vy") return k == ActorKind::Player;
  if (attr == "dir") return k == ActorKind::Bomb;
  return false;
}

enum class Action : std::uint8_t { Left = 0, Right = 1, Jump = 2, NoOp = 3 };

inline constexpr std::array<Action, 4> kAllActions = {Action::Left, Action::Right, Action::Jump,
                                                     Action::NoOp};
inline constexpr std::size_t kActionCount = kAllActions.size();

inline std::string_view action_name(Action a) {
  switch (a) {
    case Action::Left: return "Left";
    case Action::Right: return "Right";
    case Action::Jump: return "Jump";
    case Action::NoOp: return "NoOp";
  }
  return "?";
}

inline char action_letter(Action a) { return "LRJN"[static_cast<int>(a)]; }

inline std::optional<Action> action_from_name(std::string_view name) {
  for (auto a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

inline Action action_from_letter(char c) {
  switch (c) {
    case 'L': return Action::Left;
    case 'R': return Action::Right;
    case 'J': return Action::Jump;
    case 'N': return Action::NoOp;
    default: throw IntegrityError(std::string("unknown action letter '") + c + "'");
  }
}

inline std::string actions_to_letters(const std::vector<Action>& actions) {
  std::string s;
  s.reserve(actions.size());
  for (auto a : actions) s += action_letter(a);
  return s;
}

inline std::vector<Action> actions_from_letters(std::string_view s) {
  std::vector<Action> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(action_from_letter(c));
  return out;
}

struct Node {
  enum class Kind { Literal, Var, Symbol, ActorRef, Call, Arith, Compare, And, Not, True };

  Kind kind = Kind::True;
  std::int64_t value = 0;  // Literal value; Symbol's action code
  std::string name;        // Var / Symbol / ActorRef / Call name
  char op = 0;             // '+' '-' for Arith; '<' '>' '=' for Compare
  std::vector<Node> children;

  static Node literal(std::int64_t v) {
    Node n;
    n.kind = Kind::Literal;
    n.value = v;
    return n;
  }
  static Node var(std::string name) {
    Node n;
    n.kind = Kind::Var;
    n.name = std::move(name);
    return n;
  }
  static Node binary(Kind kind, char op, Node lhs, Node rhs) {
    Node n;
    n.kind = kind;
    n.op = op;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }
  static Node negate(Node guard) {
    Node n;
    n.kind = Kind::Not;
    n.children.push_back(std::move(guard));
    return n;
  }

  bool operator==(const Node&) const = default;
};

struct Effect {
  std::string target;  // "game_over" sets the flag; anything else is assigned `value`
  Node value;

  bool is_flag() const { return target == "game_over"; }
  bool operator==(const Effect&) const = default;
};

struct RuleStatement {
  int id = 0;
  bool deleted = false;  // deleted statements keep guard/effects for shadow evaluation
  Node guard;
  std::vector<Effect> effects;

  bool operator==(const RuleStatement&) const = default;
};

struct RuleScript {
  std::vector<RuleStatement> statements;

  std::size_t size() const { return statements.size(); }
  bool operator==(const RuleScript&) const = default;
};

// --- serialization ---------------------------------------------------------

inline std::string relop_text(char op) {
  switch (op) {
    case '<': return "<";
    case '>': return ">";
    default: return "==";
  }
}

inline std::string to_text(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Literal: return std::to_string(n.value);
    case Node::Kind::Var:
    case Node::Kind::Symbol:
    case Node::Kind::ActorRef: return n.name;
    case Node::Kind::Call: {
      std::string s = n.name + "(";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += ", ";
        s += to_text(n.children[i]);
      }
      return s + ")";
    }
    case Node::Kind::Arith: {
      std::string rhs = to_text(n.children[1]);
      if (n.children[1].kind == Node::Kind::Arith) rhs = "(" + rhs + ")";
      return to_text(n.children[0]) + " " + n.op + " " + rhs;
    }
    case Node::Kind::Compare:
      return to_text(n.children[0]) + " " + relop_text(n.op) + " " + to_text(n.children[1]);
    case Node::Kind::And: {
      std::string s;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += " AND ";
        s += to_text(n.children[i]);
      }
      return s;
    }
    case Node::Kind::Not: return "NOT (" + to_text(n.children[0]) + ")";
    case Node::Kind::True: return "TRUE";
  }
  return {};
}

inline std::string to_text(const Effect& e) {
  if (e.is_flag()) return e.target;
  return e.target + " = " + to_text(e.value);
}

inline std::string to_text(const RuleStatement& s) {
  std::string out = std::to_string(s.id) + ": ";
  if (s.deleted) return out + "NOP";
  out += "IF " + to_text(s.guard) + " THEN ";
  for (std::size_t i = 0; i < s.effects.size(); ++i) {
    if (i) out += "; ";
    out += to_text(s.effects[i]);
  }
  return out;
}

inline std::string to_text(const RuleScript& script) {
  std::string out;
  for (const auto& s : script.statements) out += to_text(s) + "\n";
  return out;
}

inline std::uint64_t script_hash(const RuleScript& script) { return fnv1a(to_text(script)); }

// --- parsing ----------------------------------------------------------------

namespace detail {

struct Token {
  enum class Type { Ident, Number, Op, End };
  Type type = Type::End;
  std::string text;
  std::size_t pos = 0;
};

inline std::vector<Token> tokenize_rule(std::string_view src, std::size_t base) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = base + i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                                src[j] == '.'))
        ++j;
      t.type = Token::Type::Ident;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.type = Token::Type::Number;
      t.text = std::string(src.substr(i, j - i));
      i = j;
    } else if (c == '=' && i + 1 < src.size() && src[i + 1] == '=') {
      t.type = Token::Type::Op;
      t.text = "==";
      i += 2;
    } else if (std::string_view("<>=+-(),;:").find(c) != std::string_view::npos) {
      t.type = Token::Type::Op;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", base + i);
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = base + src.size();
  out.push_back(end);
  return out;
}

class RuleParser {
 public:
  RuleParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  RuleStatement statement(int expected_id) {
    RuleStatement s;
    const Token& idtok = peek();
    if (idtok.type != Token::Type::Number) throw ParseError("expected statement id", idtok.pos);
    s.id = static_cast<int>(parse_int(next().text, "statement id"));
    if (s.id != expected_id) {
      throw ParseError("statement id " + std::to_string(s.id) + " out of sequence, expected " +
                           std::to_string(expected_id),
                       idtok.pos);
    }
    expect(":");
    if (accept_ident("NOP")) {
      s.deleted = true;
      s.guard.kind = Node::Kind::True;
    } else {
      expect_ident("IF");
      s.guard = conjunction();
      expect_ident("THEN");
      s.effects.push_back(effect());
      while (accept(";")) s.effects.push_back(effect());
    }
    if (peek().type != Token::Type::End) throw ParseError("trailing input '" + peek().text + "'", peek().pos);
    return s;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  bool accept(std::string_view op) {
    if (peek().type == Token::Type::Op && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_ident(std::string_view word) {
    if (peek().type == Token::Type::Ident && peek().text == word) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(std::string_view op) {
    if (!accept(op)) throw ParseError("expected '" + std::string(op) + "'", peek().pos);
  }
  void expect_ident(std::string_view word) {
    if (!accept_ident(word)) throw ParseError("expected " + std::string(word), peek().pos);
  }

  Node conjunction() {
    Node first = unary();
    if (!(peek().type == Token::Type::Ident && peek().text == "AND")) return first;
    Node n;
    n.kind = Node::Kind::And;
    n.children.push_back(std::move(first));
    while (accept_ident("AND")) n.children.push_back(unary());
    return n;
  }

  Node unary() {
    if (accept_ident("NOT")) {
      expect("(");
      Node inner = conjunction();
      expect(")");
      return Node::negate(std::move(inner));
    }
    if (accept_ident("TRUE")) return Node{};
    Node lhs = expr();
    const Token& t = peek();
    char op = 0;
    if (accept("<")) op = '<';
    else if (accept(">")) op = '>';
    else if (accept("==")) op = '=';
    else if (lhs.kind == Node::Kind::Call) return lhs;  // bare predicate, truthy when non-zero
    else throw ParseError("expected comparison operator", t.pos);
    Node rhs = expr();
    return Node::binary(Node::Kind::Compare, op, std::move(lhs), std::move(rhs));
  }

  Node expr() {
    Node lhs = operand();
    while (true) {
      if (accept("+")) lhs = Node::binary(Node::Kind::Arith, '+', std::move(lhs), operand());
      else if (accept("-")) lhs = Node::binary(Node::Kind::Arith, '-', std::move(lhs), operand());
      else return lhs;
    }
  }

  Node operand() {
    const Token t = peek();
    if (t.type == Token::Type::Number) {
      ++pos_;
      return Node::literal(parse_int(t.text, "literal"));
    }
    if (t.type == Token::Type::Op && t.text == "-" && tokens_[pos_ + 1].type == Token::Type::Number) {
      ++pos_;
      return Node::literal(-parse_int(next().text, "literal"));
    }
    if (accept("(")) {
      Node inner = expr();
      expect(")");
      return inner;
    }
    if (t.type == Token::Type::Ident) {
      ++pos_;
      if (accept("(")) {
        Node call;
        call.kind = Node::Kind::Call;
        call.name = t.text;
        if (!accept(")")) {
          call.children.push_back(call_arg(t.text));
          while (accept(",")) call.children.push_back(call_arg(t.text));
          expect(")");
        }
        return call;
      }
      Node n;
      if (auto a = action_from_name(t.text)) {
        n.kind = Node::Kind::Symbol;
        n.value = static_cast<std::int64_t>(*a);
      } else {
        n.kind = Node::Kind::Var;
      }
      n.name = t.text;
      return n;
    }
    throw ParseError("expected operand", t.pos);
  }

  Node call_arg(const std::string& fn) {
    if (fn == "touching") {
      const Token t = peek();
      if (t.type != Token::Type::Ident || !actor_kind_from_script(t.text))
        throw ParseError("touching() takes actor kinds", t.pos);
      ++pos_;
      Node n;
      n.kind = Node::Kind::ActorRef;
      n.name = t.text;
      return n;
    }
    return expr();
  }

  Node effect_value() { return expr(); }

  Effect effect() {
    const Token t = peek();
    if (t.type != Token::Type::Ident) throw ParseError("expected effect target", t.pos);
    ++pos_;
    Effect e;
    e.target = t.text;
    if (e.is_flag()) return e;
    expect("=");
    e.value = effect_value();
    return e;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

inline std::optional<ActorKind> var_kind(std::string_view name) {
  auto dot = name.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  return actor_kind_from_script(name.substr(0, dot));
}

inline void collect_kinds(const Node& n, std::vector<ActorKind>& out) {
  std::optional<ActorKind> k;
  if (n.kind == Node::Kind::Var) k = var_kind(n.name);
  if (n.kind == Node::Kind::ActorRef) k = actor_kind_from_script(n.name);
  if (k && *k != ActorKind::Player && std::find(out.begin(), out.end(), *k) == out.end()) out.push_back(*k);
  for (const auto& c : n.children) collect_kinds(c, out);
}

inline void validate_node(const Node& n, int id) {
  auto fail = [id](const std::string& msg) {
    throw SchemaError("statement " + std::to_string(id) + ": " + msg);
  };
  switch (n.kind) {
    case Node::Kind::Var: {
      if (n.name == "score" || n.name == "tick" || n.name == "action" || n.name == "game_over") break;
      auto dot = n.name.find('.');
      auto k = var_kind(n.name);
      if (!k || !kind_has_attribute(*k, std::string_view(n.name).substr(dot + 1)))
        fail("unknown variable '" + n.name + "'");
      break;
    }
    case Node::Kind::Call: {
      std::size_t arity = n.name == "rand" ? 1 : (n.name == "solid" || n.name == "touching") ? 2 : 0;
      if (arity == 0) fail("unknown function '" + n.name + "'");
      if (n.children.size() != arity) fail("wrong arity for '" + n.name + "'");
      break;
    }
    default: break;
  }
  for (const auto& c : n.children) validate_node(c, id);
}

}  // namespace detail

// The non-player actor kind a statement iterates over, if any.
inline std::optional<ActorKind> bound_kind(const RuleStatement& s) {
  std::vector<ActorKind> kinds;
  detail::collect_kinds(s.guard, kinds);
  for (const auto& e : s.effects) {
    detail::collect_kinds(e.value, kinds);
    if (auto k = detail::var_kind(e.target); k && *k != ActorKind::Player &&
                                              std::find(kinds.begin(), kinds.end(), *k) == kinds.end())
      kinds.push_back(*k);
  }
  if (kinds.empty()) return std::nullopt;
  return kinds.front();
}

inline void validate(const RuleScript& script) {
  for (std::size_t i = 0; i < script.statements.size(); ++i) {
    const auto& s = script.statements[i];
    if (s.id != static_cast<int>(i))
      throw IntegrityError("statement ids must be contiguous from 0; found " + std::to_string(s.id));
    if (s.deleted) continue;
    detail::validate_node(s.guard, s.id);
    std::vector<ActorKind> kinds;
    detail::collect_kinds(s.guard, kinds);
    for (const auto& e : s.effects) {
      if (!e.is_flag()) {
        detail::validate_node(e.value, s.id);
        detail::collect_kinds(e.value, kinds);
        if (e.target == "score") continue;
        auto k = detail::var_kind(e.target);
        auto dot = e.target.find('.');
        if (!k || !kind_has_attribute(*k, std::string_view(e.target).substr(dot + 1)))
          throw SchemaError("statement " + std::to_string(s.id) + ": cannot assign '" + e.target + "'");
        if (*k != ActorKind::Player && std::find(kinds.begin(), kinds.end(), *k) == kinds.end())
          kinds.push_back(*k);
      }
    }
    if (kinds.size() > 1)
      throw SchemaError("statement " + std::to_string(s.id) + " binds more than one actor kind");
  }
}

inline RuleStatement parse_statement(std::string_view line, int expected_id, std::size_t base = 0) {
  detail::RuleParser p(detail::tokenize_rule(line, base));
  return p.statement(expected_id);
}

inline RuleScript parse_script(std::string_view text) {
  RuleScript script;
  std::size_t offset = 0;
  for (const auto& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (!line.empty() && line[0] != '#') {
      script.statements.push_back(parse_statement(line, static_cast<int>(script.statements.size()), offset));
    }
    offset += raw.size() + 1;
  }
  validate(script);
  return script;
}

// Pre-order walk over every expression node of a statement: guard first, then
// each effect value in order. Mutant descriptors address nodes by this index.
inline void for_each_node(const RuleStatement& s, const std::function<void(const Node&, int)>& fn) {
  int index = 0;
  std::function<void(const Node&)> walk = [&](const Node& n) {
    fn(n, index++);
    for (const auto& c : n.children) walk(c);
  };
  walk(s.guard);
  for (const auto& e : s.effects) {
    if (!e.is_flag()) walk(e.value);
  }
}

inline Node* node_at(RuleStatement& s, int target) {
  int index = 0;
  Node* found = nullptr;
  std::function<void(Node&)> walk = [&](Node& n) {
    if (found) return;
    if (index++ == target) {
      found = &n;
      return;
    }
    for (auto& c : n.children) walk(c);
  };
  walk(s.guard);
  for (auto& e : s.effects) {
    if (!e.is_flag()) walk(e.value);
  }
  return found;
}

inline const char* kDefaultScriptText =
    "0: IF touching(player, bomb) THEN game_over\n"
    "1: IF player.y < 0 THEN game_over\n"
    "2: IF touching(player, coin) THEN coin.alive = 0; score = score + 10\n"
    "3: IF touching(player, goal) THEN goal.alive = 0; score = score + 50; game_over\n"
    "4: IF action == Left AND solid(player.x - 1, player.y) == 0 THEN player.x = player.x - 1\n"
    "5: IF action == Right AND solid(player.x + 1, player.y) == 0 THEN player.x = player.x + 1\n"
    "6: IF action == Jump AND player.vy == 0 AND solid(player.x, player.y - 1) == 1 THEN player.vy = 3\n"
    "7: IF player.vy > 0 AND solid(player.x, player.y + 1) == 1 THEN player.vy = 0\n"
    "8: IF player.vy > 0 THEN player.y = player.y + 1; player.vy = player.vy - 1\n"
    "9: IF player.vy == 0 AND solid(player.x, player.y - 1) == 0 THEN player.y = player.y - 1\n"
    "10: IF rand(8) == 0 THEN bomb.dir = 0 - bomb.dir\n"
    "11: IF solid(bomb.x + bomb.dir, bomb.y) == 1 THEN bomb.dir = 0 - bomb.dir\n"
    "12: IF solid(bomb.x + bomb.dir, bomb.y - 1) == 0 THEN bomb.dir = 0 - bomb.dir\n"
    "13: IF solid(bomb.x + bomb.dir, bomb.y) == 0 AND solid(bomb.x + bomb.dir, bomb.y - 1) == 1 THEN "
    "bomb.x = bomb.x + bomb.dir\n";

// Well-known statement ids in the default script.
namespace stmt {
inline constexpr int kBombTouch = 0;
inline constexpr int kHole = 1;
inline constexpr int kCoin = 2;
inline constexpr int kGoal = 3;
inline constexpr int kMoveLeft = 4;
inline constexpr int kMoveRight = 5;
inline constexpr int kJump = 6;
inline constexpr int kGravity = 9;
inline constexpr int kBombFlipRandom = 10;
}  // namespace stmt

inline const RuleScript& default_script() {
  static const RuleScript script = parse_script(kDefaultScriptText);
  return script;
}

}  // namespace playtest
