#pragma once

#include <set>
#include <string>
#include <vector>

#include "playtest/game.hpp"
#include "playtest/rule_script.hpp"
#include "playtest/util.hpp"

namespace playtest {

enum class MutationOperator { ROR, AOR, CR, NEG, SD };

inline std::string_view operator_name(MutationOperator op) {
  switch (op) {
    case MutationOperator::ROR: return "ROR";
    case MutationOperator::AOR: return "AOR";
    case MutationOperator::CR: return "CR";
    case MutationOperator::NEG: return "NEG";
    case MutationOperator::SD: return "SD";
  }
  return "?";
}

inline MutationOperator operator_from_name(std::string_view name) {
  for (auto op : {MutationOperator::ROR, MutationOperator::AOR, MutationOperator::CR, MutationOperator::NEG,
                  MutationOperator::SD}) {
    if (operator_name(op) == name) return op;
  }
  throw IntegrityError("unknown mutation operator '" + std::string(name) + "'");
}

// Where and how a statement is patched. `node` indexes the statement's
// expression nodes in pre-order (see for_each_node); unused for NEG and SD.
struct MutationDetail {
  int node = -1;
  std::string from;
  std::string to;

  bool operator==(const MutationDetail&) const = default;
};

struct Mutant {
  int id = 0;
  MutationOperator op = MutationOperator::SD;
  int target_statement = 0;
  MutationDetail detail;

  bool operator==(const Mutant&) const = default;
};

inline std::string detail_text(const Mutant& m) {
  switch (m.op) {
    case MutationOperator::NEG: return "guard";
    case MutationOperator::SD: return "statement";
    default:
      return "node=" + std::to_string(m.detail.node) + " from=" + m.detail.from + " to=" + m.detail.to;
  }
}

// `id<TAB>operator<TAB>statement<TAB>detail`
inline std::string to_descriptor(const Mutant& m) {
  return std::to_string(m.id) + "\t" + std::string(operator_name(m.op)) + "\t" +
         std::to_string(m.target_statement) + "\t" + detail_text(m);
}

inline Mutant parse_descriptor(std::string_view line) {
  auto f = split(line, '\t');
  if (f.size() != 4) throw IntegrityError("mutant descriptor needs 4 tab-separated fields");
  Mutant m;
  m.id = static_cast<int>(parse_int(f[0], "mutant id"));
  m.op = operator_from_name(f[1]);
  m.target_statement = static_cast<int>(parse_int(f[2], "statement"));
  if (m.op == MutationOperator::NEG || m.op == MutationOperator::SD) return m;
  auto parts = split(f[3], ' ');
  if (parts.size() != 3 || parts[0].rfind("node=", 0) != 0 || parts[1].rfind("from=", 0) != 0 ||
      parts[2].rfind("to=", 0) != 0)
    throw IntegrityError("bad mutant detail '" + f[3] + "'");
  m.detail.node = static_cast<int>(parse_int(parts[0].substr(5), "node"));
  m.detail.from = parts[1].substr(5);
  m.detail.to = parts[2].substr(3);
  return m;
}

namespace detail {

inline std::string op_token(const Node& n) {
  if (n.kind == Node::Kind::Compare) return relop_text(n.op);
  return std::string(1, n.op);
}

inline char relop_from_token(const std::string& t) {
  if (t == "<") return '<';
  if (t == ">") return '>';
  if (t == "==") return '=';
  throw IntegrityError("bad relational operator '" + t + "'");
}

// Applies a mutant to one statement in place. Throws if the mutant is stale.
inline void patch_statement(RuleStatement& s, const Mutant& m) {
  switch (m.op) {
    case MutationOperator::SD: s.deleted = true; return;
    case MutationOperator::NEG:
      if (s.guard.kind == Node::Kind::Not) {
        Node inner = std::move(s.guard.children[0]);
        s.guard = std::move(inner);
      } else {
        s.guard = Node::negate(std::move(s.guard));
      }
      return;
    default: break;
  }
  Node* n = node_at(s, m.detail.node);
  if (!n) throw IntegrityError("mutant " + std::to_string(m.id) + " addresses a missing node");
  switch (m.op) {
    case MutationOperator::ROR:
      if (n->kind != Node::Kind::Compare || op_token(*n) != m.detail.from)
        throw IntegrityError("stale ROR mutant " + std::to_string(m.id));
      n->op = relop_from_token(m.detail.to);
      break;
    case MutationOperator::AOR:
      if (n->kind != Node::Kind::Arith || op_token(*n) != m.detail.from)
        throw IntegrityError("stale AOR mutant " + std::to_string(m.id));
      n->op = m.detail.to == "+" ? '+' : '-';
      break;
    case MutationOperator::CR:
      if (n->kind != Node::Kind::Literal || std::to_string(n->value) != m.detail.from)
        throw IntegrityError("stale CR mutant " + std::to_string(m.id));
      n->value = parse_int(m.detail.to, "CR replacement");
      break;
    default: break;
  }
}

}  // namespace detail

inline RuleScript apply(const RuleScript& script, const Mutant& m) {
  if (m.target_statement < 0 || m.target_statement >= static_cast<int>(script.size()) ||
      script.statements[static_cast<std::size_t>(m.target_statement)].deleted)
    throw IntegrityError("mutant " + std::to_string(m.id) + " targets missing statement " +
                         std::to_string(m.target_statement));
  RuleScript out = script;
  detail::patch_statement(out.statements[static_cast<std::size_t>(m.target_statement)], m);
  return out;
}

// All first-order mutants, ordered by statement id, then operator
// (ROR, AOR, CR, NEG, SD), then node and replacement.
inline std::vector<Mutant> enumerate_mutants(const RuleScript& script) {
  std::vector<Mutant> out;
  for (const auto& s : script.statements) {
    if (s.deleted) continue;
    const std::string original = to_text(s);
    std::set<std::string> seen{original};
    std::vector<Mutant> candidates;

    std::vector<std::pair<int, const Node*>> nodes;
    for_each_node(s, [&](const Node& n, int idx) { nodes.emplace_back(idx, &n); });

    for (auto [idx, n] : nodes) {
      if (n->kind != Node::Kind::Compare) continue;
      for (const char* to : {"<", ">", "=="}) {
        if (detail::op_token(*n) != to)
          candidates.push_back({0, MutationOperator::ROR, s.id, {idx, detail::op_token(*n), to}});
      }
    }
    for (auto [idx, n] : nodes) {
      if (n->kind != Node::Kind::Arith) continue;
      candidates.push_back({0, MutationOperator::AOR, s.id, {idx, detail::op_token(*n), n->op == '+' ? "-" : "+"}});
    }
    for (auto [idx, n] : nodes) {
      if (n->kind != Node::Kind::Literal) continue;
      for (std::int64_t to : {n->value - 1, n->value + 1, std::int64_t{0}}) {
        if (to != n->value)
          candidates.push_back({0, MutationOperator::CR, s.id, {idx, std::to_string(n->value), std::to_string(to)}});
      }
    }
    candidates.push_back({0, MutationOperator::NEG, s.id, {}});
    candidates.push_back({0, MutationOperator::SD, s.id, {}});

    for (auto& m : candidates) {
      RuleStatement patched = s;
      detail::patch_statement(patched, m);
      if (!seen.insert(to_text(patched)).second) continue;
      m.id = static_cast<int>(out.size());
      out.push_back(m);
    }
  }
  return out;
}

// Deterministic sample that depends only on (script, n, round_seed). Smaller
// requests are prefixes of larger ones for the same seed.
inline std::vector<Mutant> select_round_mutants(const RuleScript& script, std::size_t n, std::uint64_t round_seed) {
  std::vector<Mutant> all = enumerate_mutants(script);
  SplitMix64 rng(round_seed);
  for (std::size_t i = all.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(all[i - 1], all[j]);
  }
  all.resize(std::min(n, all.size()));
  return all;
}

// Steps of a mutant replay during which the mutated statement ran. For deleted
// statements, the steps where the original guard would have held.
inline std::vector<std::size_t> mutated_steps(const Trace& mutant_trace, const Mutant& m) {
  const auto& per_step = m.op == MutationOperator::SD ? mutant_trace.shadow : mutant_trace.covered;
  std::vector<std::size_t> steps;
  for (std::size_t t = 0; t < per_step.size(); ++t) {
    for (int id : per_step[t]) {
      if (id == m.target_statement) {
        steps.push_back(t);
        break;
      }
    }
  }
  return steps;
}

}  // namespace playtest
