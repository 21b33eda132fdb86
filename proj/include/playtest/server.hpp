#pragma once

// TCP match server. Pairs the first two unpaired joiners into a match, runs
// the Planning Phase timer, pushes a state_snapshot to both players after every
// accepted command and writes finished matches to the store.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

#include "playtest/match.hpp"
#include "playtest/store.hpp"
#include "playtest/wire.hpp"

namespace playtest {

class Server {
 public:
  using Clock = std::chrono::steady_clock;

  Server(MatchConfig config, std::filesystem::path store_root)
      : config_(std::move(config)), store_root_(std::move(store_root)) {}

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving; port 0 picks a free port. Returns the port.
  int start(int port, const std::string& bind_address = "127.0.0.1") {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw PreconditionError("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1)
      throw PreconditionError("bad bind address '" + bind_address + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
      int err = errno;
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw PreconditionError("cannot listen on port " + std::to_string(port) + ": " + std::strerror(err));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    timer_thread_ = std::thread([this] { timer_loop(); });
    return port_;
  }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    {
      std::lock_guard lock(mu_);
      for (auto& s : sessions_) {
        std::lock_guard slock(s->mu);
        for (int fd : s->fds) {
          if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        }
      }
      for (int fd : pending_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    timer_cv_.notify_all();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (timer_thread_.joinable()) timer_thread_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

  int port() const { return port_; }

  // Blocks until the server is stopped.
  void wait() {
    std::unique_lock lock(mu_);
    timer_cv_.wait(lock, [this] { return !running_; });
  }

  std::size_t finished_matches() const { return finished_.load(); }

 private:
  struct Session {
    std::string id;
    MatchState state;
    std::vector<Command> log;
    std::array<std::string, kPlayers> tokens;
    std::array<int, kPlayers> fds{-1, -1};
    std::array<std::optional<Clock::time_point>, kPlayers> disconnected_at;
    Clock::time_point planning_deadline;
    std::uint64_t seq = 0;
    bool paired = false;
    bool stored = false;
    std::mutex mu;
  };

  void accept_loop() {
    while (running_) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (!running_) return;
        continue;
      }
      std::lock_guard lock(mu_);
      pending_fds_.push_back(fd);
      workers_.emplace_back([this, fd] { connection_loop(fd); });
    }
  }

  void connection_loop(int fd) {
    Decoder dec;
    std::shared_ptr<Session> session;
    int player = -1;
    for (;;) {
      std::optional<std::string> body;
      try {
        body = read_body(fd, dec);
      } catch (const ParseError& e) {
        send_message(fd, error_message("", std::string("bad frame: ") + e.what()));
        break;
      }
      if (!body) break;
      Message msg;
      try {
        msg = decode_body(*body);
      } catch (const ParseError& e) {
        send_message(fd, error_message("", std::string("malformed message: ") + e.what()));
        continue;
      }
      if (msg.kind == MessageKind::Join) {
        if (session) {
          send_message(fd, error_message(session->id, "already joined"));
          continue;
        }
        std::tie(session, player) = join(fd);
        continue;
      }
      if (!session || msg.match_id != session->id || msg.token != session->tokens[static_cast<std::size_t>(player)]) {
        send_message(fd, error_message(msg.match_id, "token mismatch: message rejected"));
        continue;
      }
      handle_command(*session, player, msg);
    }
    if (session) disconnect(*session, player);
    {
      std::lock_guard lock(mu_);
      std::erase(pending_fds_, fd);
    }
    ::close(fd);
  }

  std::pair<std::shared_ptr<Session>, int> join(int fd) {
    std::lock_guard lock(mu_);
    std::shared_ptr<Session> s;
    int player = 0;
    if (waiting_ && !waiting_->paired) {
      s = waiting_;
      player = 1;
      waiting_.reset();
    } else {
      s = std::make_shared<Session>();
      s->id = "match-" + std::to_string(++match_counter_);
      MatchConfig cfg = config_;
      cfg.match_seed = mix_seed(config_.match_seed, match_counter_);
      s->state = start_match(cfg);
      sessions_.push_back(s);
      waiting_ = s;
    }
    std::lock_guard slock(s->mu);
    s->tokens[static_cast<std::size_t>(player)] = make_token(s->id, player);
    s->fds[static_cast<std::size_t>(player)] = fd;
    if (player == 1) {
      s->paired = true;
      s->planning_deadline = Clock::now() + std::chrono::seconds(s->state.config.planning_seconds);
      broadcast_snapshots(*s);
    }
    return {s, player};
  }

  std::string make_token(const std::string& id, int player) {
    SplitMix64 rng(mix_seed(token_entropy_ ^ fnv1a(id), static_cast<std::uint64_t>(player) + 17));
    std::ostringstream os;
    os << std::hex << rng.next() << rng.next();
    return os.str();
  }

  void handle_command(Session& s, int player, const Message& msg) {
    std::lock_guard lock(s.mu);
    auto& fd = s.fds[static_cast<std::size_t>(player)];
    if (!s.paired) {
      send_message(fd, error_message(s.id, "waiting for an opponent"));
      return;
    }
    Command c;
    try {
      c = command_from_message(msg, s.state, player);
    } catch (const ParseError& e) {
      send_message(fd, error_message(s.id, std::string("malformed message: ") + e.what()));
      return;
    }
    try {
      apply_logged(s, c);
    } catch (const Error& e) {
      send_message(fd, error_message(s.id, e.what()));
      return;
    }
    if (both_confirmed(s.state)) {
      run_execution(s);
    } else {
      broadcast_snapshots(s);
    }
  }

  void apply_logged(Session& s, const Command& c) {
    auto report = apply_command(s.state, c);
    s.log.push_back(c);
    if (report) deliver_report(s, *report);
  }

  void deliver_report(Session& s, const ExecutionReport& r) {
    for (int pl = 0; pl < kPlayers; ++pl) {
      Message m{MessageKind::ExecutionReport, s.id, s.tokens[static_cast<std::size_t>(pl)], ++s.seq,
                report_to_text(r, pl)};
      if (s.fds[static_cast<std::size_t>(pl)] >= 0) send_message(s.fds[static_cast<std::size_t>(pl)], m);
    }
  }

  // Caller holds s.mu.
  void run_execution(Session& s) {
    apply_logged(s, Command::of(Command::Type::EndPlanning));
    if (s.state.phase == Phase::Execution) {
      apply_logged(s, Command::of(Command::Type::NextRound));
      s.planning_deadline = Clock::now() + std::chrono::seconds(s.state.config.planning_seconds);
    }
    finish_if_done(s);
    broadcast_snapshots(s);
  }

  void finish_if_done(Session& s) {
    if (s.state.phase != Phase::Finished || s.stored) return;
    s.stored = true;
    try {
      write_record(store_root_, s.id + "-" + std::to_string(s.state.config.match_seed), s.state, s.log);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "store write failed for %s: %s\n", s.id.c_str(), e.what());
    }
    ++finished_;
  }

  void broadcast_snapshots(Session& s) {
    for (int pl = 0; pl < kPlayers; ++pl) {
      int fd = s.fds[static_cast<std::size_t>(pl)];
      if (fd < 0) continue;
      send_message(fd, Message{MessageKind::StateSnapshot, s.id, s.tokens[static_cast<std::size_t>(pl)], ++s.seq,
                               snapshot_payload(s.state, pl)});
    }
  }

  void disconnect(Session& s, int player) {
    {
      std::lock_guard lock(mu_);
      if (waiting_.get() == &s) waiting_.reset();
    }
    std::lock_guard lock(s.mu);
    s.fds[static_cast<std::size_t>(player)] = -1;
    s.disconnected_at[static_cast<std::size_t>(player)] = Clock::now();
    if (!s.paired) s.stored = true;  // never started; nothing to keep
  }

  void timer_loop() {
    std::unique_lock lock(mu_);
    while (running_) {
      timer_cv_.wait_for(lock, std::chrono::milliseconds(50));
      auto sessions = sessions_;
      lock.unlock();
      for (auto& s : sessions) tick(*s);
      lock.lock();
    }
  }

  void tick(Session& s) {
    std::lock_guard lock(s.mu);
    if (!s.paired || s.state.phase == Phase::Finished) return;
    auto now = Clock::now();
    for (int pl = 0; pl < kPlayers; ++pl) {
      auto& since = s.disconnected_at[static_cast<std::size_t>(pl)];
      if (since && now - *since >= std::chrono::seconds(s.state.config.grace_seconds)) {
        apply_logged(s, Command::of(Command::Type::Forfeit, pl));
        finish_if_done(s);
        broadcast_snapshots(s);
        return;
      }
    }
    if (s.state.phase == Phase::Planning && now >= s.planning_deadline) {
      for (int pl = 0; pl < kPlayers; ++pl) {
        if (!s.state.players[static_cast<std::size_t>(pl)].confirmed)
          apply_logged(s, Command::of(Command::Type::Confirm, pl));
      }
      run_execution(s);
    }
  }

  Message error_message(const std::string& match_id, const std::string& text) {
    return Message{MessageKind::Error, match_id, "", 0, "message\t" + text + "\n"};
  }

  MatchConfig config_;
  std::filesystem::path store_root_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> finished_{0};
  std::uint64_t token_entropy_ =
      static_cast<std::uint64_t>(std::chrono::high_resolution_clock::now().time_since_epoch().count());
  std::mutex mu_;
  std::condition_variable timer_cv_;
  std::vector<std::shared_ptr<Session>> sessions_;
  std::shared_ptr<Session> waiting_;
  std::vector<int> pending_fds_;
  std::vector<std::thread> workers_;
  std::uint64_t match_counter_ = 0;
  std::thread accept_thread_;
  std::thread timer_thread_;
};

// Minimal blocking client used by tests and tools.
class Client {
 public:
  explicit Client(int port, const std::string& host = "127.0.0.1") {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr);
    if (fd_ < 0 || ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
      throw PreconditionError("cannot connect to port " + std::to_string(port));
    timeval tv{10, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~Client() { close(); }
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  bool send(MessageKind kind, const std::string& payload = {}) {
    return send_message(fd_, Message{kind, match_id, token, 0, payload});
  }
  bool send_raw(std::string_view bytes) { return send_all(fd_, bytes); }

  // Next message; snapshots update match_id/token/last_seq.
  std::optional<Message> receive() {
    auto body = read_body(fd_, dec_);
    if (!body) return std::nullopt;
    Message m = decode_body(*body);
    if (m.kind != MessageKind::Error) {
      match_id = m.match_id;
      token = m.token;
      last_seq = m.seq;
    }
    return m;
  }

  // Skips messages until one of `kind` arrives.
  std::optional<Message> receive(MessageKind kind) {
    for (;;) {
      auto m = receive();
      if (!m || m->kind == kind) return m;
    }
  }

  std::string match_id;
  std::string token;
  std::uint64_t last_seq = 0;

 private:
  int fd_ = -1;
  Decoder dec_;
};

}  // namespace playtest
