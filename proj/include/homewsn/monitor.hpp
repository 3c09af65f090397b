#pragma once

// Monitoring-center service.
//
// Coordinators connect over TCP and exchange wire datagrams. Every storable
// datagram (SENSOR_DATA, ALARM_CID, HEARTBEAT) is persisted and answered
// with an ACK echoing its seq; a Contact-ID payload that fails to decode is
// still persisted, flagged, and answered with a NACK. The first HEARTBEAT
// registers the session; its ACK carries the routing radius the coordinator
// must use (8-byte big-endian IEEE-754 double).
//
// Commands go the other way as COMMAND datagrams and are tracked by tickets
// that the coordinator resolves with ACK/NACK carrying the command's seq.
//
// Threading: one io thread drives all sockets. Store and ticket state sit
// behind one mutex, so any thread may query or dispatch.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <nlohmann/json.hpp>

#include "homewsn/cid.hpp"
#include "homewsn/store.hpp"
#include "homewsn/wire.hpp"

namespace homewsn::monitor {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

enum class TicketState { Queued, Sent, Acked, Nacked, TimedOut };

inline const char* to_string(TicketState s) {
  switch (s) {
    case TicketState::Queued: return "queued";
    case TicketState::Sent: return "sent";
    case TicketState::Acked: return "acked";
    case TicketState::Nacked: return "nacked";
    case TicketState::TimedOut: return "timed_out";
  }
  return "?";
}

inline bool is_terminal(TicketState s) {
  return s == TicketState::Acked || s == TicketState::Nacked || s == TicketState::TimedOut;
}

struct CommandTicket {
  std::uint64_t ticket_id = 0;
  NodeId target;
  wire::Opcode opcode = wire::Opcode::QuerySwitch;
  TicketState state = TicketState::Queued;
  std::uint32_t coordinator_id = 0;
  std::uint16_t seq = 0;

  /// Moves the ticket forward; backward or post-terminal moves are refused.
  bool advance(TicketState next) {
    if (is_terminal(state) || static_cast<int>(next) <= static_cast<int>(state)) return false;
    state = next;
    return true;
  }
};

struct MonitorConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7007;        // 0 picks a free port
  std::uint16_t admin_port = 7008;  // 0 picks a free port
  bool admin_enabled = true;
  std::filesystem::path store_path = "monitor.log";
  double radius = 5.0;
  std::chrono::milliseconds command_timeout{5000};
  bool verbose = false;
};

inline wire::Bytes encode_radius(double k) {
  wire::Bytes b;
  const auto bits = std::bit_cast<std::uint64_t>(k);
  for (int s = 56; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(bits >> s));
  return b;
}

inline std::optional<double> decode_radius(std::span<const std::uint8_t> b) {
  if (b.size() != 8) return std::nullopt;
  std::uint64_t bits = 0;
  for (auto x : b) bits = (bits << 8) | x;
  return std::bit_cast<double>(bits);
}

inline nlohmann::json record_to_json(const SensorRecord& r) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string payload;
  for (auto b : r.payload) {
    payload += hex[b >> 4];
    payload += hex[b & 15];
  }
  nlohmann::json j{{"cursor", r.position},   {"received_at", r.received_at}, {"coordinator_id", r.coordinator_id},
                   {"src_node", r.src_node.value}, {"seq", r.seq}, {"kind", to_string(r.kind)},
                   {"payload_hex", payload}, {"parse_error", r.parse_error}};
  if (r.alarm) {
    j["cid"] = {{"account", r.alarm->account},         {"message_type", r.alarm->message_type},
                {"qualifier", to_string(r.alarm->qualifier)}, {"event_code", r.alarm->event_code},
                {"partition", r.alarm->partition},     {"zone", r.alarm->zone}};
  }
  return j;
}

inline nlohmann::json ticket_to_json(const CommandTicket& t) {
  return {{"ticket_id", t.ticket_id}, {"target", t.target.value}, {"opcode", static_cast<int>(t.opcode)},
          {"state", to_string(t.state)}, {"coordinator_id", t.coordinator_id}, {"seq", t.seq}};
}

class Monitor {
 public:
  /// Opens the store and binds both listeners. Throws StartupError.
  explicit Monitor(MonitorConfig cfg) : cfg_(std::move(cfg)), acceptor_(io_), admin_acceptor_(io_) {
    try {
      store_ = std::make_unique<RecordStore>(cfg_.store_path);
    } catch (const Error& e) {
      throw Error(Errc::StartupError, std::string("store: ") + e.what());
    }
    next_coordinator_ = store_->max_coordinator_id() + 1;
    bind(acceptor_, cfg_.port);
    if (cfg_.admin_enabled) bind(admin_acceptor_, cfg_.admin_port);
  }

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  ~Monitor() { stop(); }

  void start() {
    if (thread_.joinable()) return;
    accept();
    if (cfg_.admin_enabled) accept_admin();
    thread_ = std::thread([this] { io_.run(); });
  }

  /// Stops accepting, lets queued writes drain (bounded wait), then joins.
  void stop() {
    if (!thread_.joinable()) return;
    asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      admin_acceptor_.close(ec);
      auto open = sessions_;  // shutdown() may erase from sessions_
      for (auto& [id, s] : open) s->shutdown();
      for (auto& a : admin_sessions_) a->close();
      for (auto& [id, t] : timers_) t->cancel();
    });
    {
      std::unique_lock lk(mu_);
      cv_.wait_for(lk, std::chrono::seconds(2), [this] { return live_sessions_ == 0; });
    }
    io_.stop();
    thread_.join();
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }
  std::uint16_t admin_port() const { return admin_acceptor_.local_endpoint().port(); }
  double radius() const { return cfg_.radius; }

  /// Applies one inbound datagram from `coordinator_id` and returns the reply.
  std::optional<wire::Datagram> handle_datagram(std::uint32_t coordinator_id, const wire::Datagram& d) {
    std::lock_guard lk(mu_);
    return handle_locked(coordinator_id, d);
  }

  /// Frames and sends a COMMAND through a connected coordinator (the most
  /// recently registered one unless `coordinator` is given).
  CommandTicket dispatch_command(NodeId target, wire::Opcode op, std::optional<std::uint32_t> coordinator = {}) {
    if (target.value < 1 || target.value > 255) throw Error(Errc::InvalidInput, "command target must be 1..255");
    CommandTicket t;
    {
      std::lock_guard lk(mu_);
      std::optional<std::uint32_t> chosen;
      if (coordinator) {
        auto it = info_.find(*coordinator);
        if (it != info_.end() && it->second.connected && it->second.registered) chosen = *coordinator;
      } else {
        for (const auto& [id, info] : info_)
          if (info.connected && info.registered && (!chosen || info.registered_order > info_[*chosen].registered_order))
            chosen = id;
      }
      if (!chosen) throw Error(Errc::NoCoordinator, "no registered coordinator session");
      t.ticket_id = ++ticket_counter_;
      t.target = target;
      t.opcode = op;
      t.coordinator_id = *chosen;
      t.seq = info_[*chosen].next_command_seq++;
      tickets_[t.ticket_id] = t;
      log_locked("ticket " + std::to_string(t.ticket_id) + " queued for node " + std::to_string(target.value));
    }
    const std::uint64_t id = t.ticket_id;
    asio::post(io_, [this, id] { send_command(id); });
    return t;
  }

  std::optional<CommandTicket> ticket(std::uint64_t id) const {
    std::lock_guard lk(mu_);
    auto it = tickets_.find(id);
    if (it == tickets_.end()) return std::nullopt;
    return it->second;
  }

  /// Blocks until the ticket is terminal or `timeout` passes.
  CommandTicket wait_ticket(std::uint64_t id, std::chrono::milliseconds timeout) const {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return is_terminal(tickets_.at(id).state); });
    return tickets_.at(id);
  }

  HistoryPage query_history(const HistoryFilter& f, std::size_t limit, std::uint64_t cursor = 0) const {
    std::lock_guard lk(mu_);
    return store_->query(f, limit, cursor);
  }

  std::vector<SensorRecord> live_snapshot() const {
    std::lock_guard lk(mu_);
    return store_->latest();
  }

  std::vector<std::string> log() const {
    std::lock_guard lk(mu_);
    return log_;
  }

  /// Ids of currently connected coordinator sessions.
  std::vector<std::uint32_t> sessions() const {
    std::lock_guard lk(mu_);
    std::vector<std::uint32_t> out;
    for (const auto& [id, info] : info_)
      if (info.connected) out.push_back(id);
    return out;
  }

  /// Blocks until `pred` holds over the record count or `timeout` passes.
  bool wait_records(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lk(mu_);
    return cv_.wait_for(lk, timeout, [&] { return store_->size() >= count; });
  }

 private:
  struct SessionInfo {
    bool connected = true;
    bool registered = false;
    std::uint64_t registered_order = 0;
    std::uint16_t next_command_seq = 0;
    std::set<std::pair<std::uint16_t, std::uint64_t>> seen;  // (seq, payload hash)
  };

  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(Monitor& m, tcp::socket sock, std::uint32_t id) : m_(m), sock_(std::move(sock)), id_(id) {}

    void start() { read(); }

    void send(wire::Bytes bytes) {
      if (closed_) return;
      queue_.push_back(std::move(bytes));
      if (queue_.size() == 1) write();
    }

    void shutdown() {
      closing_ = true;
      if (queue_.empty()) close();
    }

    void close() {
      if (closed_) return;
      closed_ = true;
      boost::system::error_code ec;
      sock_.shutdown(tcp::socket::shutdown_both, ec);
      sock_.close(ec);
      m_.session_closed(id_);
    }

    bool closed() const { return closed_; }

   private:
    void read() {
      sock_.async_read_some(asio::buffer(buf_), [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
        if (ec) {
          self->close();
          return;
        }
        self->decoder_.feed(std::span<const std::uint8_t>(self->buf_.data(), n));
        try {
          while (auto d = self->decoder_.next()) {
            if (auto reply = self->m_.handle_datagram(self->id_, *d)) self->send(wire::encode_datagram(*reply));
          }
        } catch (const DecodeError& e) {
          self->m_.log_event("session " + std::to_string(self->id_) + " protocol error: " + e.what());
          self->shutdown();
          return;
        }
        if (!self->closing_) self->read();
      });
    }

    void write() {
      asio::async_write(sock_, asio::buffer(queue_.front()),
                        [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                          if (ec) {
                            self->close();
                            return;
                          }
                          self->queue_.pop_front();
                          if (!self->queue_.empty()) {
                            self->write();
                          } else if (self->closing_) {
                            self->close();
                          }
                        });
    }

    Monitor& m_;
    tcp::socket sock_;
    std::uint32_t id_;
    std::array<std::uint8_t, 4096> buf_{};
    wire::StreamDecoder decoder_;
    std::deque<wire::Bytes> queue_;
    bool closing_ = false;
    bool closed_ = false;
  };

  class AdminSession : public std::enable_shared_from_this<AdminSession> {
   public:
    AdminSession(Monitor& m, tcp::socket sock) : m_(m), sock_(std::move(sock)) {}

    void start() { read(); }

    void close() {
      boost::system::error_code ec;
      sock_.close(ec);
    }

   private:
    void read() {
      asio::async_read_until(sock_, asio::dynamic_buffer(in_), '\n',
                             [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
                               if (ec) {
                                 self->close();
                                 return;
                               }
                               const std::string line = self->in_.substr(0, n);
                               self->in_.erase(0, n);
                               self->out_ = self->m_.admin_request(line).dump() + "\n";
                               asio::async_write(self->sock_, asio::buffer(self->out_),
                                                 [self](boost::system::error_code wec, std::size_t) {
                                                   if (wec) {
                                                     self->close();
                                                     return;
                                                   }
                                                   self->read();
                                                 });
                             });
    }

    Monitor& m_;
    tcp::socket sock_;
    std::string in_;
    std::string out_;
  };

  void bind(tcp::acceptor& a, std::uint16_t port) {
    try {
      const tcp::endpoint ep(asio::ip::make_address(cfg_.host), port);
      a.open(ep.protocol());
      a.set_option(tcp::acceptor::reuse_address(true));
      a.bind(ep);
      a.listen();
    } catch (const boost::system::system_error& e) {
      throw Error(Errc::StartupError, "cannot listen on " + cfg_.host + ":" + std::to_string(port) + ": " + e.what());
    }
  }

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
      if (ec) return;
      std::uint32_t id;
      {
        std::lock_guard lk(mu_);
        id = next_coordinator_++;
        info_[id] = SessionInfo{};
        ++live_sessions_;
        log_locked("session " + std::to_string(id) + " connected");
      }
      auto s = std::make_shared<Session>(*this, std::move(sock), id);
      sessions_[id] = s;
      s->start();
      accept();
    });
  }

  void accept_admin() {
    admin_acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
      if (ec) return;
      auto a = std::make_shared<AdminSession>(*this, std::move(sock));
      admin_sessions_.push_back(a);
      a->start();
      accept_admin();
    });
  }

  void session_closed(std::uint32_t id) {
    sessions_.erase(id);
    std::lock_guard lk(mu_);
    info_[id].connected = false;
    --live_sessions_;
    log_locked("session " + std::to_string(id) + " closed");
    cv_.notify_all();
  }

  // io thread
  void send_command(std::uint64_t id) {
    wire::Datagram d;
    std::shared_ptr<Session> session;
    {
      std::lock_guard lk(mu_);
      CommandTicket& t = tickets_.at(id);
      if (is_terminal(t.state)) return;
      auto it = sessions_.find(t.coordinator_id);
      if (it == sessions_.end() || it->second->closed()) {
        t.advance(TicketState::TimedOut);
        log_locked("ticket " + std::to_string(id) + " timed out: session gone");
        cv_.notify_all();
        return;
      }
      session = it->second;
      d = {wire::MsgType::Command, t.seq, 0,
           wire::encode_command({static_cast<std::uint8_t>(t.target.value), t.opcode})};
      t.advance(TicketState::Sent);
    }
    session->send(wire::encode_datagram(d));
    auto timer = std::make_unique<asio::steady_timer>(io_, cfg_.command_timeout);
    timer->async_wait([this, id](boost::system::error_code ec) {
      timers_.erase(id);
      if (ec) return;
      std::lock_guard lk(mu_);
      CommandTicket& t = tickets_.at(id);
      if (t.advance(TicketState::TimedOut)) {
        log_locked("ticket " + std::to_string(id) + " timed out");
        cv_.notify_all();
      }
    });
    timers_[id] = std::move(timer);
  }

  static std::uint64_t payload_hash(const wire::Bytes& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : p) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::optional<wire::Datagram> handle_locked(std::uint32_t cid, const wire::Datagram& d) {
    SessionInfo& info = info_[cid];
    const std::string who = "session " + std::to_string(cid);
    auto reply = [&](wire::MsgType t, wire::Bytes payload = {}) {
      return wire::Datagram{t, d.seq, d.src_node, std::move(payload)};
    };

    switch (d.type) {
      case wire::MsgType::SensorData:
      case wire::MsgType::AlarmCid:
      case wire::MsgType::Heartbeat: {
        if (d.type == wire::MsgType::Heartbeat && !info.registered) {
          info.registered = true;
          info.registered_order = ++registration_counter_;
          log_locked(who + " registered (coordinator node " + std::to_string(d.src_node) + ")");
        }
        const auto key = std::make_pair(d.seq, payload_hash(d.payload));
        bool parse_error = false;
        if (!info.seen.insert(key).second) {
          log_locked(who + " duplicate seq " + std::to_string(d.seq) + " suppressed");
          if (d.type == wire::MsgType::AlarmCid) {
            try {
              cid::decode_cid(std::string(d.payload.begin(), d.payload.end()));
            } catch (const Error&) {
              parse_error = true;
            }
          }
        } else {
          try {
            const SensorRecord& r = store_->append(cid, d);
            parse_error = r.parse_error;
          } catch (const Error& e) {
            log_locked(who + " store failure: " + e.what());
            return reply(wire::MsgType::Nack);
          }
          cv_.notify_all();
          if (d.type == wire::MsgType::Heartbeat) log_locked(who + " heartbeat seq " + std::to_string(d.seq));
          if (d.type == wire::MsgType::AlarmCid) {
            log_locked(who + (parse_error ? " alarm with unparseable Contact-ID" : " alarm stored"));
          }
        }
        if (parse_error) return reply(wire::MsgType::Nack);
        if (d.type == wire::MsgType::Heartbeat) return reply(wire::MsgType::Ack, encode_radius(cfg_.radius));
        return reply(wire::MsgType::Ack);
      }
      case wire::MsgType::Ack:
      case wire::MsgType::Nack: {
        const bool ack = d.type == wire::MsgType::Ack;
        for (auto& [id, t] : tickets_) {
          if (t.coordinator_id != cid || t.seq != d.seq || is_terminal(t.state)) continue;
          t.advance(ack ? TicketState::Acked : TicketState::Nacked);
          log_locked("ticket " + std::to_string(id) + (ack ? " acked" : " nacked"));
          asio::post(io_, [this, tid = id] {
            if (auto it = timers_.find(tid); it != timers_.end()) it->second->cancel();
          });
          cv_.notify_all();
          return std::nullopt;
        }
        log_locked(who + " " + wire::to_string(d.type) + " for unknown seq " + std::to_string(d.seq) + " ignored");
        return std::nullopt;
      }
      case wire::MsgType::DiscoveryReport:
        log_locked(who + " discovery report from node " + std::to_string(d.src_node));
        return reply(wire::MsgType::Ack);
      case wire::MsgType::Command:
        log_locked(who + " sent a COMMAND upstream; rejected");
        return reply(wire::MsgType::Nack);
    }
    return std::nullopt;
  }

  nlohmann::json admin_request(const std::string& line) {
    using nlohmann::json;
    try {
      const json req = json::parse(line);
      const std::string op = req.at("op").get<std::string>();
      if (op == "query") {
        HistoryFilter f;
        if (req.contains("src_node")) f.src_node = NodeId{req["src_node"].get<int>()};
        if (req.contains("coordinator")) f.coordinator_id = req["coordinator"].get<std::uint32_t>();
        if (req.contains("from")) f.from = req["from"].get<std::uint64_t>();
        if (req.contains("to")) f.to = req["to"].get<std::uint64_t>();
        if (req.contains("kind")) {
          f.kind = parse_record_kind(req["kind"].get<std::string>());
          if (!f.kind) throw Error(Errc::InvalidInput, "unknown record kind");
        }
        const auto page = query_history(f, req.value("limit", std::size_t{100}), req.value("cursor", std::uint64_t{0}));
        json recs = json::array();
        for (const auto& r : page.records) recs.push_back(record_to_json(r));
        json out{{"ok", true}, {"records", recs}};
        out["next_cursor"] = page.next_cursor ? json(*page.next_cursor) : json(nullptr);
        return out;
      }
      if (op == "snapshot") {
        json recs = json::array();
        for (const auto& r : live_snapshot()) recs.push_back(record_to_json(r));
        return {{"ok", true}, {"records", recs}};
      }
      if (op == "send_command") {
        const int target = req.at("target").get<int>();
        const std::string o = req.value("opcode", std::string("on"));
        wire::Opcode opcode;
        if (o == "on") opcode = wire::Opcode::SwitchOn;
        else if (o == "off") opcode = wire::Opcode::SwitchOff;
        else if (o == "query") opcode = wire::Opcode::QuerySwitch;
        else throw Error(Errc::InvalidInput, "opcode must be on, off or query");
        std::optional<std::uint32_t> coord;
        if (req.contains("coordinator")) coord = req["coordinator"].get<std::uint32_t>();
        return {{"ok", true}, {"ticket", ticket_to_json(dispatch_command(NodeId{target}, opcode, coord))}};
      }
      if (op == "ticket") {
        auto t = ticket(req.at("id").get<std::uint64_t>());
        if (!t) throw Error(Errc::InvalidInput, "unknown ticket");
        return {{"ok", true}, {"ticket", ticket_to_json(*t)}};
      }
      if (op == "sessions") return {{"ok", true}, {"sessions", sessions()}};
      throw Error(Errc::InvalidInput, "unknown op " + op);
    } catch (const Error& e) {
      return {{"ok", false}, {"error", std::string(homewsn::to_string(e.code()))}, {"message", e.what()}};
    } catch (const std::exception& e) {
      return {{"ok", false}, {"error", "InvalidInput"}, {"message", e.what()}};
    }
  }

  void log_event(const std::string& s) {
    std::lock_guard lk(mu_);
    log_locked(s);
  }

  void log_locked(const std::string& s) {
    log_.push_back(s);
    if (cfg_.verbose) std::cerr << "[monitor] " << s << '\n';
  }

  MonitorConfig cfg_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  tcp::acceptor admin_acceptor_;
  std::thread thread_;

  // io thread only
  std::map<std::uint32_t, std::shared_ptr<Session>> sessions_;
  std::vector<std::shared_ptr<AdminSession>> admin_sessions_;
  std::map<std::uint64_t, std::unique_ptr<asio::steady_timer>> timers_;

  // guarded by mu_
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::unique_ptr<RecordStore> store_;
  std::map<std::uint32_t, SessionInfo> info_;
  std::map<std::uint64_t, CommandTicket> tickets_;
  std::vector<std::string> log_;
  std::uint32_t next_coordinator_ = 1;
  std::uint64_t ticket_counter_ = 0;
  std::uint64_t registration_counter_ = 0;
  int live_sessions_ = 0;
};

}  // namespace homewsn::monitor
