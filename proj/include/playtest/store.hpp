#pragma once

// Append-only on-disk record of finished matches. One directory per match:
//   config.txt script.txt level.txt   the configuration
//   commands.log                      one command per line
//   final_state.txt                   "hash\t<n>" then the serialized state
//   harvest/trace-<k>.txt             winner's traces
//   harvest/assertions.txt            "<k>\t<assertion>"
//   harvest/provenance.txt            one line per trace

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "playtest/match.hpp"
#include "playtest/synthesis.hpp"

namespace playtest {

namespace fs = std::filesystem;

inline fs::path default_store_root() {
  if (const char* env = std::getenv("PLAYTEST_STORE"); env && *env) return env;
  return fs::path("playtest-store");
}

struct StoreRecord {
  std::string match_id;
  MatchConfig config;
  std::vector<Command> log;
  std::uint64_t final_hash = 0;
  Harvest harvest;
};

namespace detail {

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("cannot write " + p.string());
  out << text;
}

}  // namespace detail

inline fs::path write_record(const fs::path& root, const std::string& match_id, const MatchState& final_state,
                             const std::vector<Command>& log) {
  fs::path dir = root / match_id;
  if (fs::exists(dir)) throw IntegrityError("store already holds match '" + match_id + "'");
  fs::create_directories(dir / "harvest");

  detail::write_file(dir / "script.txt", to_text(final_state.script()));
  detail::write_file(dir / "level.txt", level_to_text(final_state.level()));
  detail::write_file(dir / "config.txt",
                     config_to_text(final_state.config) + "script_file=script.txt\nlevel_file=level.txt\n");
  std::string commands;
  for (const auto& c : log) commands += command_to_text(c) + "\n";
  detail::write_file(dir / "commands.log", commands);
  detail::write_file(dir / "final_state.txt",
                     "hash\t" + std::to_string(state_hash(final_state)) + "\n" + serialize_match(final_state));

  if (final_state.phase == Phase::Finished) {
    Harvest h = harvest(final_state, match_id);
    std::string assertions, provenance;
    for (std::size_t k = 0; k < h.traces.size(); ++k) {
      detail::write_file(dir / "harvest" / ("trace-" + std::to_string(k) + ".txt"), serialize_trace(h.traces[k]));
      provenance += h.provenance[k] + "\n";
    }
    for (const auto& a : h.assertions) assertions += std::to_string(a.source_trace) + "\t" + serialize(a) + "\n";
    detail::write_file(dir / "harvest" / "assertions.txt", assertions);
    detail::write_file(dir / "harvest" / "provenance.txt", provenance);
  }
  return dir;
}

inline StoreRecord read_record(const fs::path& dir) {
  StoreRecord r;
  r.match_id = dir.filename().string();
  r.config = parse_config(detail::read_file(dir / "config.txt"), dir);
  for (const auto& line : split_lines(detail::read_file(dir / "commands.log"))) {
    if (!line.empty()) r.log.push_back(command_from_text(line));
  }
  auto final_lines = split_lines(detail::read_file(dir / "final_state.txt"));
  auto head = final_lines.empty() ? std::vector<std::string>{} : split(final_lines[0], '\t');
  if (head.size() != 2 || head[0] != "hash") throw IntegrityError(r.match_id + ": bad final_state.txt");
  r.final_hash = parse_u64(head[1], "final hash");

  fs::path hdir = dir / "harvest";
  if (fs::exists(hdir / "provenance.txt")) {
    for (const auto& line : split_lines(detail::read_file(hdir / "provenance.txt"))) {
      if (line.empty()) continue;
      r.harvest.traces.push_back(
          parse_trace(detail::read_file(hdir / ("trace-" + std::to_string(r.harvest.traces.size()) + ".txt"))));
      r.harvest.provenance.push_back(line);
    }
    for (const auto& line : split_lines(detail::read_file(hdir / "assertions.txt"))) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw IntegrityError(r.match_id + ": bad assertion line");
      Assertion a = parse_assertion(std::string_view(line).substr(tab + 1));
      a.source_trace = static_cast<int>(parse_int(line.substr(0, tab), "trace index"));
      if (a.source_trace < 0 || a.source_trace >= static_cast<int>(r.harvest.traces.size()))
        throw IntegrityError(r.match_id + ": assertion references a missing trace");
      r.harvest.assertions.push_back(std::move(a));
    }
  }
  return r;
}

// Rebuilds the match from its command log and compares state hashes.
inline bool verify_record(const StoreRecord& r) {
  return state_hash(replay_commands(r.config, r.log)) == r.final_hash;
}

inline std::vector<fs::path> list_records(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "commands.log")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Harvest from every finished record in the store, in directory order.
inline Harvest harvest_store(const fs::path& root) {
  Harvest all;
  for (const auto& dir : list_records(root)) all.append(read_record(dir).harvest);
  return all;
}

}  // namespace playtest
