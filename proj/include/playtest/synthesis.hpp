#pragma once

// The Test module: turns the winners' traces and assertions into static
// tests and scores suites against mutants.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "playtest/assertion.hpp"
#include "playtest/game.hpp"
#include "playtest/match.hpp"
#include "playtest/mutation.hpp"

namespace playtest {

struct Harvest {
  std::vector<Trace> traces;
  std::vector<std::string> provenance;  // "<match>/<player>" per trace
  std::vector<Assertion> assertions;    // source_trace indexes `traces`

  void append(const Harvest& other) {
    int offset = static_cast<int>(traces.size());
    traces.insert(traces.end(), other.traces.begin(), other.traces.end());
    provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
    for (auto a : other.assertions) {
      a.source_trace += offset;
      assertions.push_back(std::move(a));
    }
  }
};

// Only the winner's artifacts; a draw yields nothing.
inline Harvest harvest(const MatchState& m, const std::string& match_id = "match") {
  if (m.phase != Phase::Finished) throw PreconditionError("harvest requires a finished match");
  Harvest h;
  if (!m.winner) return h;
  const int w = *m.winner;
  const PlayerState& p = m.players[static_cast<std::size_t>(w)];
  std::map<int, int> index;
  for (int tid : p.traces) {
    index[tid] = static_cast<int>(h.traces.size());
    h.traces.push_back(m.traces[static_cast<std::size_t>(tid)].trace);
    h.provenance.push_back(match_id + "/" + std::to_string(w));
  }
  for (auto a : p.assertions) {
    a.source_trace = index.at(a.source_trace);
    h.assertions.push_back(std::move(a));
  }
  return h;
}

// Unit-cost edit distance, two-row dynamic programme.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = std::size(a);
  const std::size_t m = std::size(b);
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  auto ai = std::begin(a);
  for (std::size_t i = 1; i <= n; ++i, ++ai) {
    cur[0] = i;
    auto bj = std::begin(b);
    for (std::size_t j = 1; j <= m; ++j, ++bj) {
      std::size_t subst = prev[j - 1] + (*ai == *bj ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::size_t default_dedup_threshold(const std::vector<Trace>& traces) {
  if (traces.empty()) return 0;
  double total = 0;
  for (const auto& t : traces) total += static_cast<double>(t.length());
  return static_cast<std::size_t>(std::lround(0.1 * total / static_cast<double>(traces.size())));
}

// Greedy pass in input order. Returns, for every trace, the index of its
// representative (a representative maps to itself).
inline std::vector<std::size_t> cluster_traces(const std::vector<Trace>& traces, std::size_t threshold) {
  std::vector<std::size_t> reps;
  std::vector<std::size_t> assignment(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto it = std::find_if(reps.begin(), reps.end(), [&](std::size_t r) {
      return levenshtein(traces[r].actions, traces[i].actions) <= threshold;
    });
    if (it == reps.end()) {
      reps.push_back(i);
      assignment[i] = i;
    } else {
      assignment[i] = *it;
    }
  }
  return assignment;
}

inline std::vector<Trace> dedup_traces(const std::vector<Trace>& traces, std::size_t threshold) {
  auto assignment = cluster_traces(traces, threshold);
  std::vector<Trace> out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (assignment[i] == i) out.push_back(traces[i]);
  }
  return out;
}

inline std::vector<Assertion> dedup_assertions(const std::vector<Assertion>& assertions) {
  std::vector<Assertion> out;
  for (const auto& a : assertions) {
    bool dup = std::any_of(out.begin(), out.end(), [&](const Assertion& b) { return blocks_equal(a, b); });
    if (!dup) out.push_back(a);
  }
  return out;
}

struct StaticTest {
  std::uint64_t script_hash = 0;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  std::vector<Assertion> oracles;
  std::string provenance;
};

// One test per representative trace, carrying every distinct assertion made
// on a trace of its cluster that does not fail on the representative's replay.
inline std::vector<StaticTest> synthesize_static(const RuleScript& script, const Harvest& h, std::size_t threshold,
                                                 std::vector<std::string>* log = nullptr,
                                                 const LevelLayout& level = default_level()) {
  auto assignment = cluster_traces(h.traces, threshold);
  std::vector<StaticTest> out;
  for (std::size_t rep = 0; rep < h.traces.size(); ++rep) {
    if (assignment[rep] != rep) continue;
    StaticTest test;
    test.script_hash = script_hash(script);
    test.seed = h.traces[rep].seed;
    test.actions = h.traces[rep].actions;
    test.provenance = h.provenance.empty() ? std::string() : h.provenance[rep];
    Trace replayed = replay(script, test.seed, test.actions, level);

    std::vector<Assertion> candidates;
    for (const auto& a : h.assertions) {
      if (a.source_trace >= 0 && assignment[static_cast<std::size_t>(a.source_trace)] == rep) candidates.push_back(a);
    }
    for (const auto& a : dedup_assertions(candidates)) {
      try {
        Verdict v = evaluate(a, replayed);
        if (v.status == Verdict::Status::Violated) {
          if (log) log->push_back("dropped '" + serialize(a) + "': violated on representative at step " +
                                  std::to_string(*v.violated_at));
          continue;
        }
      } catch (const Error& e) {
        if (log) log->push_back("dropped '" + serialize(a) + "': " + e.what());
        continue;
      }
      test.oracles.push_back(a);
    }
    out.push_back(std::move(test));
  }
  return out;
}

// Replays a test on `script`; returns the index of the first violated oracle.
inline std::optional<std::size_t> first_violation(const StaticTest& test, const RuleScript& script,
                                                  const LevelLayout& level = default_level()) {
  Trace t = replay(script, test.seed, test.actions, level);
  for (std::size_t i = 0; i < test.oracles.size(); ++i) {
    if (evaluate(test.oracles[i], t, ScopePolicy::Clamp).status == Verdict::Status::Violated) return i;
  }
  return std::nullopt;
}

struct MutantOutcome {
  int mutant_id = 0;
  bool killed = false;
  int killing_test = -1;
};

struct SuiteReport {
  std::vector<MutantOutcome> outcomes;
  double mutation_score = 0.0;
};

inline SuiteReport run_suite(const std::vector<StaticTest>& tests, const RuleScript& script,
                             const std::vector<Mutant>& mutants, const LevelLayout& level = default_level()) {
  const auto hash = script_hash(script);
  for (const auto& t : tests) {
    if (t.script_hash != hash) throw IntegrityError("static test was synthesized for a different script");
  }
  SuiteReport report;
  report.outcomes.resize(mutants.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < mutants.size(); i = next++) {
      RuleScript ms = apply(script, mutants[i]);
      MutantOutcome o{mutants[i].id, false, -1};
      for (std::size_t k = 0; k < tests.size() && !o.killed; ++k) {
        if (first_violation(tests[k], ms, level)) {
          o.killed = true;
          o.killing_test = static_cast<int>(k);
        }
      }
      report.outcomes[i] = o;
    }
  };
  unsigned n = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::size_t killed = 0;
  for (const auto& o : report.outcomes) killed += o.killed ? 1 : 0;
  report.mutation_score = mutants.empty() ? 0.0 : static_cast<double>(killed) / static_cast<double>(mutants.size());
  return report;
}

// --- file formats ------------------------------------------------------------

inline std::string serialize_static_test(const StaticTest& t) {
  std::ostringstream os;
  os << "STATICTEST\t" << t.script_hash << '\t' << t.seed << '\t' << (t.provenance.empty() ? "-" : t.provenance)
     << '\n';
  os << 'A';
  for (Action a : t.actions) os << '\t' << static_cast<int>(a);
  os << '\n';
  for (const auto& o : t.oracles) os << "O\t" << serialize(o) << '\n';
  return os.str();
}

inline StaticTest parse_static_test(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.size() < 2) throw IntegrityError("static test truncated");
  auto header = split(lines[0], '\t');
  if (header.size() != 4 || header[0] != "STATICTEST") throw IntegrityError("bad static test header");
  StaticTest t;
  t.script_hash = parse_u64(header[1], "script hash");
  t.seed = parse_u64(header[2], "seed");
  t.provenance = header[3] == "-" ? "" : header[3];
  auto actions = split(lines[1], '\t');
  if (actions[0] != "A") throw IntegrityError("static test missing action line");
  for (std::size_t k = 1; k < actions.size(); ++k) {
    auto code = parse_int(actions[k], "action");
    if (code < 0 || code >= static_cast<std::int64_t>(kActionCount)) throw IntegrityError("unknown action code");
    t.actions.push_back(static_cast<Action>(code));
  }
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].rfind("O\t", 0) != 0) throw IntegrityError("bad oracle line");
    t.oracles.push_back(parse_assertion(std::string_view(lines[i]).substr(2)));
  }
  return t;
}

inline std::string format_score(double score) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << score;
  return os.str();
}

inline std::string suite_report_to_text(const SuiteReport& r) {
  std::ostringstream os;
  for (const auto& o : r.outcomes) {
    os << o.mutant_id << '\t' << (o.killed ? 1 : 0) << '\t';
    if (o.killing_test >= 0) os << o.killing_test;
    else os << '-';
    os << '\n';
  }
  os << "score\t" << format_score(r.mutation_score) << '\n';
  return os.str();
}

}  // namespace playtest
