#pragma once

// Length-prefixed text messages between clients and the match server.
//
//   <byte length of body>\n
//   <kind>\n
//   match: <id>\n
//   token: <token>\n
//   seq: <n>\n
//   \n
//   <payload lines>

#include <cerrno>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/socket.h>
#include <unistd.h>

#include "playtest/match.hpp"

namespace playtest {

enum class MessageKind {
  Join,
  StateSnapshot,
  RecordActions,
  Purchase,
  PlaceAssertion,
  ConfirmDone,
  ExecutionReport,
  Error,
};

inline constexpr std::array<MessageKind, 8> kAllMessageKinds = {
    MessageKind::Join,           MessageKind::StateSnapshot, MessageKind::RecordActions,   MessageKind::Purchase,
    MessageKind::PlaceAssertion, MessageKind::ConfirmDone,   MessageKind::ExecutionReport, MessageKind::Error,
};

inline std::string_view kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::Join: return "join";
    case MessageKind::StateSnapshot: return "state_snapshot";
    case MessageKind::RecordActions: return "record_actions";
    case MessageKind::Purchase: return "purchase";
    case MessageKind::PlaceAssertion: return "place_assertion";
    case MessageKind::ConfirmDone: return "confirm_done";
    case MessageKind::ExecutionReport: return "execution_report";
    case MessageKind::Error: return "error";
  }
  return "?";
}

inline MessageKind kind_from_name(std::string_view name) {
  for (auto k : kAllMessageKinds) {
    if (kind_name(k) == name) return k;
  }
  throw ParseError("unknown message kind '" + std::string(name) + "'", 0);
}

struct Message {
  MessageKind kind = MessageKind::Error;
  std::string match_id;
  std::string token;
  std::uint64_t seq = 0;
  std::string payload;

  bool operator==(const Message&) const = default;
};

inline constexpr std::size_t kMaxMessageBytes = 1 << 22;

inline std::string encode(const Message& m) {
  std::string body = std::string(kind_name(m.kind)) + "\nmatch: " + m.match_id + "\ntoken: " + m.token +
                     "\nseq: " + std::to_string(m.seq) + "\n\n" + m.payload;
  return std::to_string(body.size()) + "\n" + body;
}

inline Message decode_body(std::string_view body) {
  Message m;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("message header truncated", pos);
    auto line = body.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto header = [&](std::string_view key) {
    auto line = next_line();
    if (line.substr(0, key.size()) != key) throw ParseError("expected '" + std::string(key) + "' header", pos);
    return std::string(line.substr(key.size()));
  };
  m.kind = kind_from_name(next_line());
  m.match_id = header("match: ");
  m.token = header("token: ");
  std::string seq = header("seq: ");
  try {
    m.seq = parse_u64(seq, "seq");
  } catch (const Error&) {
    throw ParseError("bad sequence number", pos);
  }
  if (!next_line().empty()) throw ParseError("expected blank line after headers", pos);
  m.payload = std::string(body.substr(pos));
  return m;
}

// Incremental decoder for a byte stream. A framing error poisons the stream,
// since the next message boundary is unknown.
class Decoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }

  // Next complete message body, if any. Throws ParseError on a bad frame.
  std::optional<std::string> next_body() {
    auto nl = buffer_.find('\n');
    if (nl == std::string::npos) {
      if (buffer_.size() > 20) throw ParseError("missing length prefix", 0);
      return std::nullopt;
    }
    std::uint64_t len = 0;
    try {
      len = parse_u64(buffer_.substr(0, nl), "length");
    } catch (const Error&) {
      throw ParseError("bad length prefix", 0);
    }
    if (len > kMaxMessageBytes) throw ParseError("message too large", 0);
    if (buffer_.size() < nl + 1 + len) return std::nullopt;
    std::string body = buffer_.substr(nl + 1, len);
    buffer_.erase(0, nl + 1 + len);
    return body;
  }

 private:
  std::string buffer_;
};

// --- payloads ----------------------------------------------------------------

// What `player` may see: their own state in full, the opponent's life and
// attributes only. Never includes opponent assertions or test artifacts.
inline std::string snapshot_payload(const MatchState& m, int player) {
  const PlayerState& me = m.players[static_cast<std::size_t>(player)];
  const PlayerState& op = m.players[static_cast<std::size_t>(1 - player)];
  std::ostringstream os;
  os << "phase\t" << phase_name(m.phase) << "\n";
  os << "round\t" << m.round << "\n";
  os << "round_seed\t" << m.round_seed << "\n";
  os << "planning_seconds\t" << m.config.planning_seconds << "\n";
  os << "you\t" << player << "\n";
  os << "trace_seed\t" << mix_seed(m.round_seed, static_cast<std::uint64_t>(player) + 1) << "\n";
  os << "self\t" << me.life << "\t" << me.action_points << "\t" << me.attack << "\t" << me.armour << "\t"
     << me.playthrough_time << "\t" << me.mutant_count_attr << "\t" << me.constructs << "\t" << me.recorded_this_phase
     << "\t" << me.confirmed << "\n";
  os << "opponent\t" << op.life << "\t" << op.attack << "\t" << op.armour << "\t" << op.playthrough_time << "\t"
     << op.mutant_count_attr << "\n";
  for (int tid : me.traces) {
    const auto& st = m.traces[static_cast<std::size_t>(tid)];
    os << "trace\t" << tid << "\t" << st.round << "\t" << st.trace.seed << "\t" << actions_to_letters(st.trace.actions)
       << "\n";
  }
  for (const auto& a : me.assertions) os << "assertion\t" << a.source_trace << "\t" << serialize(a) << "\n";
  if (m.phase == Phase::Finished) os << "winner\t" << (m.winner ? *m.winner : -1) << "\n";
  return os.str();
}

// Translates a client message into an engine command for `player`. The trace
// seed of a recording comes from the snapshot, not the client.
inline Command command_from_message(const Message& msg, const MatchState& m, int player) {
  std::map<std::string, std::string> fields;
  for (const auto& line : split_lines(msg.payload)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("payload line needs key<TAB>value", 0);
    fields[line.substr(0, tab)] = line.substr(tab + 1);
  }
  auto field = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(std::string("missing payload field '") + key + "'", 0);
    return it->second;
  };
  switch (msg.kind) {
    case MessageKind::RecordActions: {
      auto it = fields.find("actions");
      std::vector<Action> actions;
      try {
        if (it != fields.end()) actions = actions_from_letters(it->second);
      } catch (const Error& e) {
        throw ParseError(e.what(), 0);
      }
      return Command::record(player, mix_seed(m.round_seed, static_cast<std::uint64_t>(player) + 1), std::move(actions));
    }
    case MessageKind::Purchase:
      try {
        return Command::buy(player, item_from_name(field("item")));
      } catch (const IntegrityError& e) {
        throw ParseError(e.what(), 0);
      }
    case MessageKind::PlaceAssertion: {
      int trace = 0;
      try {
        trace = static_cast<int>(parse_int(field("trace"), "trace"));
      } catch (const IntegrityError& e) {
        throw ParseError(e.what(), 0);
      }
      return Command::place(player, trace, field("assertion"));
    }
    case MessageKind::ConfirmDone: return Command::of(Command::Type::Confirm, player);
    default: throw ParseError("'" + std::string(kind_name(msg.kind)) + "' is not a client command", 0);
  }
}

inline std::map<std::string, std::string> payload_fields(std::string_view payload) {
  std::map<std::string, std::string> out;
  for (const auto& line : split_lines(payload)) {
    auto tab = line.find('\t');
    if (tab != std::string::npos && !out.count(line.substr(0, tab))) out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

// --- blocking socket helpers ---------------------------------------------------

inline bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

inline bool send_message(int fd, const Message& m) { return send_all(fd, encode(m)); }

// Reads until one full body is available; nothing on EOF or socket error.
inline std::optional<std::string> read_body(int fd, Decoder& dec) {
  for (;;) {
    if (auto body = dec.next_body()) return body;
    char buf[4096];
    ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    dec.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

}  // namespace playtest
