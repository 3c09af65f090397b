#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "homewsn/cid.hpp"
#include "homewsn/fixtures.hpp"
#include "homewsn/gateway.hpp"
#include "homewsn/monitor.hpp"

using namespace homewsn;
using namespace homewsn::monitor;
using namespace std::chrono_literals;
namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

std::filesystem::path temp_store(const std::string& tag) {
  static std::atomic<int> n{0};
  auto p = std::filesystem::temp_directory_path() /
           ("homewsn-mon-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n++) + ".log");
  std::filesystem::remove(p);
  return p;
}

struct StoreFile {
  explicit StoreFile(const std::string& tag) : path(temp_store(tag)) {}
  ~StoreFile() { std::filesystem::remove(path); }
  std::filesystem::path path;
};

MonitorConfig local_config(const std::filesystem::path& store) {
  MonitorConfig c;
  c.port = 0;
  c.admin_port = 0;
  c.store_path = store;
  c.command_timeout = 2000ms;
  return c;
}

wire::Datagram reading(std::uint16_t seq, std::uint16_t node, std::uint16_t value = 100) {
  return {wire::MsgType::SensorData, seq, node, wire::encode_reading({false, false, value, 0})};
}

wire::Datagram alarm(std::uint16_t seq, std::uint16_t node, const std::string& digits) {
  return {wire::MsgType::AlarmCid, seq, node, wire::Bytes(digits.begin(), digits.end())};
}

HistoryFilter by_node(int node) {
  HistoryFilter f;
  f.src_node = NodeId{node};
  return f;
}

HistoryFilter by_kind(RecordKind kind) {
  HistoryFilter f;
  f.kind = kind;
  return f;
}

// Blocking datagram client for the coordinator port.
class RawClient {
 public:
  explicit RawClient(std::uint16_t port) : sock_(io_) { sock_.connect({asio::ip::make_address("127.0.0.1"), port}); }

  void send(const wire::Datagram& d) { send_bytes(wire::encode_datagram(d)); }
  void send_bytes(const wire::Bytes& b) { asio::write(sock_, asio::buffer(b)); }

  std::optional<wire::Datagram> receive(std::chrono::milliseconds timeout = 2000ms) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      if (auto d = dec_.next()) return d;
      boost::system::error_code ec;
      const std::size_t avail = sock_.available(ec);
      if (ec) return std::nullopt;
      if (avail == 0) {
        std::this_thread::sleep_for(2ms);
        continue;
      }
      std::array<std::uint8_t, 4096> buf;
      const std::size_t n = sock_.read_some(asio::buffer(buf), ec);
      if (ec) return std::nullopt;
      dec_.feed(std::span<const std::uint8_t>(buf.data(), n));
    }
    return std::nullopt;
  }

  // true once the peer has closed the connection
  bool closed_by_peer(std::chrono::milliseconds timeout = 2000ms) {
    sock_.non_blocking(true);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      std::array<std::uint8_t, 256> buf;
      boost::system::error_code ec;
      sock_.read_some(asio::buffer(buf), ec);
      if (ec == asio::error::eof || ec == asio::error::connection_reset) return true;
      std::this_thread::sleep_for(5ms);
    }
    return false;
  }

 private:
  asio::io_context io_;
  tcp::socket sock_;
  wire::StreamDecoder dec_;
};

nlohmann::json admin(std::uint16_t port, const nlohmann::json& req) {
  asio::io_context io;
  tcp::socket s(io);
  s.connect({asio::ip::make_address("127.0.0.1"), port});
  const std::string line = req.dump() + "\n";
  asio::write(s, asio::buffer(line));
  std::string in;
  asio::read_until(s, asio::dynamic_buffer(in), '\n');
  return nlohmann::json::parse(in.substr(0, in.find('\n')));
}

bool log_contains(const Monitor& m, const std::string& needle) {
  for (const auto& l : m.log())
    if (l.find(needle) != std::string::npos) return true;
  return false;
}

template <class Pred>
bool eventually(Pred p, std::chrono::milliseconds timeout = 2000ms) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (p()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return p();
}

}  // namespace

TEST(Tickets, StatesOnlyMoveForward) {
  CommandTicket t;
  EXPECT_TRUE(t.advance(TicketState::Sent));
  EXPECT_FALSE(t.advance(TicketState::Queued));
  EXPECT_TRUE(t.advance(TicketState::Acked));
  EXPECT_FALSE(t.advance(TicketState::TimedOut));
  EXPECT_EQ(t.state, TicketState::Acked);
}

TEST(Radius, RoundTrips) {
  for (double k : {0.0, 1.0, 5.0, 2.75, 1e9}) EXPECT_EQ(decode_radius(encode_radius(k)), k);
  EXPECT_EQ(encode_radius(5.0), (wire::Bytes{0x40, 0x14, 0, 0, 0, 0, 0, 0}));
  EXPECT_FALSE(decode_radius(wire::Bytes{1, 2}));
}

TEST(Ingest, ReadingIsStoredAndAcknowledged) {
  StoreFile f("ack");
  Monitor m(local_config(f.path));
  const auto reply = m.handle_datagram(1, reading(17, 7, 345));
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->type, wire::MsgType::Ack);
  EXPECT_EQ(reply->seq, 17);
  EXPECT_EQ(reply->src_node, 7);
  const auto page = m.query_history(by_node(7), 10);
  ASSERT_EQ(page.records.size(), 1u);
  EXPECT_EQ(page.records[0].kind, RecordKind::Reading);
  EXPECT_EQ(page.records[0].coordinator_id, 1u);
  EXPECT_EQ(wire::decode_reading(page.records[0].payload).reading, 345);
}

TEST(Ingest, AlarmIsParsed) {
  StoreFile f("alarm");
  Monitor m(local_config(f.path));
  const auto reply = m.handle_datagram(1, alarm(3, 1, "1234181131010158"));
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->type, wire::MsgType::Ack);
  const auto recs = m.query_history(by_kind(RecordKind::Alarm), 10).records;
  ASSERT_EQ(recs.size(), 1u);
  ASSERT_TRUE(recs[0].alarm);
  EXPECT_EQ(recs[0].alarm->event_code, "131");
  EXPECT_EQ(recs[0].alarm->qualifier, cid::Qualifier::NewEvent);
  EXPECT_FALSE(recs[0].parse_error);
}

TEST(Ingest, BadContactIdIsKeptAndNacked) {
  StoreFile f("badcid");
  Monitor m(local_config(f.path));
  const auto reply = m.handle_datagram(1, alarm(4, 1, "1234181131010159"));
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->type, wire::MsgType::Nack);
  const auto recs = m.query_history(by_kind(RecordKind::Alarm), 10).records;
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_TRUE(recs[0].parse_error);
  EXPECT_FALSE(recs[0].alarm);
}

TEST(Ingest, UnknownAckIsIgnored) {
  StoreFile f("unk");
  Monitor m(local_config(f.path));
  EXPECT_FALSE(m.handle_datagram(1, {wire::MsgType::Ack, 999, 1, {}}));
  EXPECT_TRUE(log_contains(m, "unknown seq 999 ignored"));
  EXPECT_EQ(m.query_history({}, 10).records.size(), 0u);
}

TEST(Ingest, DuplicatesAreAckedButStoredOnce) {
  StoreFile f("dup");
  Monitor m(local_config(f.path));
  EXPECT_EQ(m.handle_datagram(1, reading(5, 3))->type, wire::MsgType::Ack);
  EXPECT_EQ(m.handle_datagram(1, reading(5, 3))->type, wire::MsgType::Ack);
  EXPECT_EQ(m.query_history({}, 10).records.size(), 1u);
  // same seq, new payload: a wrapped counter, not a retransmission
  m.handle_datagram(1, reading(5, 3, 101));
  // same seq from another coordinator
  m.handle_datagram(2, reading(5, 3));
  EXPECT_EQ(m.query_history({}, 10).records.size(), 3u);
}

TEST(Ingest, HeartbeatCarriesRadius) {
  StoreFile f("hb");
  auto cfg = local_config(f.path);
  cfg.radius = 3.5;
  Monitor m(cfg);
  const auto reply = m.handle_datagram(1, {wire::MsgType::Heartbeat, 1, 1, {}});
  ASSERT_TRUE(reply);
  EXPECT_EQ(decode_radius(reply->payload), 3.5);
}

TEST(History, FiltersLimitsAndCursor) {
  StoreFile f("hist");
  Monitor m(local_config(f.path));
  for (std::uint16_t i = 0; i < 25; ++i) m.handle_datagram(1, reading(i, 2 + i % 3));
  m.handle_datagram(1, alarm(100, 1, "1234181131010158"));

  EXPECT_EQ(m.query_history({}, 1000).records.size(), 26u);
  EXPECT_EQ(m.query_history(by_node(2), 1000).records.size(), 9u);
  EXPECT_EQ(m.query_history(by_kind(RecordKind::Alarm), 1000).records.size(), 1u);
  EXPECT_TRUE(m.query_history(by_node(9), 10).records.empty());

  std::vector<std::uint16_t> seqs;
  std::uint64_t cursor = 0;
  for (;;) {
    const auto page = m.query_history(by_node(3), 3, cursor);
    EXPECT_LE(page.records.size(), 3u);
    for (const auto& r : page.records) seqs.push_back(r.seq);
    if (!page.next_cursor) break;
    cursor = *page.next_cursor;
  }
  EXPECT_EQ(seqs, (std::vector<std::uint16_t>{1, 4, 7, 10, 13, 16, 19, 22}));

  const auto all = m.query_history({}, 1000).records;
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LT(all[i - 1].received_at, all[i].received_at);
  HistoryFilter window;
  window.from = all[5].received_at;
  window.to = all[9].received_at;
  EXPECT_EQ(m.query_history(window, 100).records.size(), 5u);
}

TEST(History, EmptyStore) {
  StoreFile f("empty");
  Monitor m(local_config(f.path));
  const auto page = m.query_history({}, 10);
  EXPECT_TRUE(page.records.empty());
  EXPECT_FALSE(page.next_cursor);
  EXPECT_TRUE(m.live_snapshot().empty());
}

TEST(History, MalformedFilters) {
  StoreFile f("bad");
  Monitor m(local_config(f.path));
  auto code = [&](const HistoryFilter& flt, std::size_t limit) {
    try {
      m.query_history(flt, limit);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code({}, 0), Errc::InvalidInput);
  HistoryFilter inverted;
  inverted.from = 10;
  inverted.to = 5;
  EXPECT_EQ(code(inverted, 10), Errc::InvalidInput);
  EXPECT_EQ(code(by_node(0), 10), Errc::InvalidInput);
}

TEST(Snapshot, LatestPerNodeWins) {
  StoreFile f("snap");
  Monitor m(local_config(f.path));
  m.handle_datagram(1, reading(1, 4, 10));
  m.handle_datagram(1, reading(2, 5, 20));
  m.handle_datagram(1, reading(3, 4, 30));
  const auto snap = m.live_snapshot();
  ASSERT_EQ(snap.size(), 2u);
  EXPECT_EQ(snap[0].src_node, NodeId{4});
  EXPECT_EQ(wire::decode_reading(snap[0].payload).reading, 30);
  EXPECT_EQ(snap[1].src_node, NodeId{5});
}

TEST(Store, SurvivesRestart) {
  StoreFile f("restart");
  {
    Monitor m(local_config(f.path));
    for (std::uint16_t i = 0; i < 10; ++i) m.handle_datagram(1, reading(i, 6));
    m.handle_datagram(2, alarm(50, 1, "1234181131010158"));
  }
  Monitor again(local_config(f.path));
  const auto recs = again.query_history({}, 100).records;
  ASSERT_EQ(recs.size(), 11u);
  EXPECT_EQ(recs[10].alarm->event_code, "131");
  EXPECT_EQ(recs[10].coordinator_id, 2u);
  // new sessions never reuse a stored coordinator id
  again.start();
  RawClient c(again.port());
  c.send({wire::MsgType::Heartbeat, 1, 1, {}});
  ASSERT_TRUE(c.receive());
  EXPECT_EQ(again.sessions(), std::vector<std::uint32_t>{3});
  again.stop();
}

TEST(Store, TruncatedTailIsDropped) {
  StoreFile f("tail");
  {
    RecordStore s(f.path);
    s.append(1, reading(1, 2));
    s.append(1, reading(2, 2));
  }
  const auto full = std::filesystem::file_size(f.path);
  std::filesystem::resize_file(f.path, full - 3);
  RecordStore s(f.path);
  EXPECT_EQ(s.size(), 1u);
  s.append(1, reading(3, 2));
  RecordStore reread(f.path);
  ASSERT_EQ(reread.size(), 2u);
  EXPECT_EQ(reread.records()[1].seq, 3);
}

TEST(Store, CorruptRecordIsAnError) {
  StoreFile f("corrupt");
  {
    RecordStore s(f.path);
    s.append(1, reading(1, 2));
  }
  {
    std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(18);  // inside the framed datagram
    io.put('\x00');
  }
  try {
    RecordStore s(f.path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StoreError);
  }
  try {
    Monitor m(local_config(f.path));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StartupError);
  }
}

TEST(Startup, OccupiedPort) {
  StoreFile a("porta"), b("portb");
  Monitor first(local_config(a.path));
  auto cfg = local_config(b.path);
  cfg.port = first.port();
  try {
    Monitor second(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StartupError);
  }
}

TEST(Tcp, HeartbeatRoundTrip) {
  StoreFile f("tcp");
  Monitor m(local_config(f.path));
  m.start();
  RawClient c(m.port());
  c.send({wire::MsgType::Heartbeat, 42, 1, {}});
  const auto reply = c.receive();
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->type, wire::MsgType::Ack);
  EXPECT_EQ(reply->seq, 42);
  EXPECT_EQ(decode_radius(reply->payload), 5.0);
  EXPECT_EQ(m.query_history(by_kind(RecordKind::Heartbeat), 10).records.size(), 1u);
  m.stop();
}

TEST(Tcp, ConcurrentCoordinatorsAreKeptApart) {
  StoreFile f("two");
  Monitor m(local_config(f.path));
  m.start();
  RawClient a(m.port()), b(m.port());
  auto pump = [](RawClient& c, std::uint16_t node) {
    for (std::uint16_t i = 0; i < 50; ++i) {
      c.send(reading(i, node));
      auto r = c.receive();
      ASSERT_TRUE(r);
      ASSERT_EQ(r->seq, i);
    }
  };
  std::thread ta([&] { pump(a, 2); });
  std::thread tb([&] { pump(b, 3); });
  ta.join();
  tb.join();
  const auto recs = m.query_history({}, 1000).records;
  ASSERT_EQ(recs.size(), 100u);
  std::set<std::uint32_t> coord_for_2, coord_for_3;
  for (const auto& r : recs) (r.src_node == NodeId{2} ? coord_for_2 : coord_for_3).insert(r.coordinator_id);
  EXPECT_EQ(coord_for_2.size(), 1u);
  EXPECT_EQ(coord_for_3.size(), 1u);
  EXPECT_NE(*coord_for_2.begin(), *coord_for_3.begin());
  m.stop();
}

TEST(Tcp, GarbageClosesOnlyThatSession) {
  StoreFile f("garbage");
  Monitor m(local_config(f.path));
  m.start();
  RawClient good(m.port()), bad(m.port());
  good.send({wire::MsgType::Heartbeat, 1, 1, {}});
  ASSERT_TRUE(good.receive());
  bad.send_bytes(wire::Bytes(20, 0x42));
  EXPECT_TRUE(bad.closed_by_peer());
  EXPECT_TRUE(eventually([&] { return log_contains(m, "protocol error"); }));
  good.send(reading(2, 4));
  const auto r = good.receive();
  ASSERT_TRUE(r);
  EXPECT_EQ(r->type, wire::MsgType::Ack);
  EXPECT_EQ(m.sessions().size(), 1u);
  m.stop();
}

TEST(Commands, NeedARegisteredCoordinator) {
  StoreFile f("nocoord");
  Monitor m(local_config(f.path));
  m.start();
  try {
    m.dispatch_command(NodeId{10}, wire::Opcode::SwitchOn);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoCoordinator);
  }
  // connected but not yet registered by a heartbeat
  RawClient c(m.port());
  c.send(reading(1, 2));
  ASSERT_TRUE(c.receive());
  EXPECT_THROW(m.dispatch_command(NodeId{10}, wire::Opcode::SwitchOn), Error);
  m.stop();
}

TEST(Commands, TimeoutWhenNobodyAnswers) {
  StoreFile f("timeout");
  auto cfg = local_config(f.path);
  cfg.command_timeout = 100ms;
  Monitor m(cfg);
  m.start();
  RawClient c(m.port());
  c.send({wire::MsgType::Heartbeat, 1, 1, {}});
  ASSERT_TRUE(c.receive());
  const CommandTicket t = m.dispatch_command(NodeId{10}, wire::Opcode::SwitchOn);
  const auto cmd = c.receive();
  ASSERT_TRUE(cmd);
  EXPECT_EQ(cmd->type, wire::MsgType::Command);
  EXPECT_EQ(wire::decode_command(cmd->payload).target, 10);
  EXPECT_EQ(m.wait_ticket(t.ticket_id, 2000ms).state, TicketState::TimedOut);
  // a late ACK does not resurrect it
  c.send({wire::MsgType::Ack, cmd->seq, 10, {}});
  EXPECT_TRUE(eventually([&] { return log_contains(m, "ignored"); }));
  EXPECT_EQ(m.ticket(t.ticket_id)->state, TicketState::TimedOut);
  m.stop();
}

class GatewayEndToEnd : public ::testing::TestWithParam<std::pair<double, TicketState>> {};

TEST_P(GatewayEndToEnd, CommandOutcomeFollowsRadius) {
  const auto [k, expected] = GetParam();
  StoreFile f("e2e");
  auto cfg = local_config(f.path);
  cfg.radius = k;
  Monitor m(cfg);
  m.start();
  sim::Network net(fixtures::table1_topology(), {5, 1, 30});
  Gateway gw(net, "127.0.0.1", m.port());
  gw.register_session();
  EXPECT_EQ(net.radius(), k);
  gw.run(100);
  EXPECT_GT(m.query_history(by_kind(RecordKind::Reading), 1000).records.size(), 0u);

  const CommandTicket t = m.dispatch_command(NodeId{10}, wire::Opcode::SwitchOn);
  ASSERT_TRUE(gw.poll_downlink(2000ms));
  CommandTicket now = t;
  for (int i = 0; i < 50 && !is_terminal(now.state); ++i) {
    gw.run(1);
    now = m.wait_ticket(t.ticket_id, 10ms);
  }
  EXPECT_EQ(now.state, expected);
  EXPECT_EQ(net.node(NodeId{10}).relay_switch == sim::Switch::On, expected == TicketState::Acked);
  m.stop();
}

INSTANTIATE_TEST_SUITE_P(Radius, GatewayEndToEnd,
                         ::testing::Values(std::make_pair(5.0, TicketState::Acked),
                                           std::make_pair(1.0, TicketState::Nacked)));

TEST(Admin, JsonProtocol) {
  StoreFile f("admin");
  Monitor m(local_config(f.path));
  m.start();
  for (std::uint16_t i = 0; i < 5; ++i) m.handle_datagram(1, reading(i, 3));
  m.handle_datagram(1, alarm(9, 1, "1234181131010158"));

  auto q = admin(m.admin_port(), {{"op", "query"}, {"src_node", 3}, {"limit", 2}});
  EXPECT_TRUE(q["ok"]);
  EXPECT_EQ(q["records"].size(), 2u);
  EXPECT_FALSE(q["next_cursor"].is_null());

  q = admin(m.admin_port(), {{"op", "query"}, {"kind", "alarm"}});
  ASSERT_EQ(q["records"].size(), 1u);
  EXPECT_EQ(q["records"][0]["cid"]["event_code"], "131");

  EXPECT_EQ(admin(m.admin_port(), {{"op", "snapshot"}})["records"].size(), 2u);
  EXPECT_EQ(admin(m.admin_port(), {{"op", "query"}, {"limit", 0}})["error"], "InvalidInput");
  EXPECT_EQ(admin(m.admin_port(), {{"op", "query"}, {"kind", "smoke"}})["error"], "InvalidInput");
  EXPECT_EQ(admin(m.admin_port(), {{"op", "send_command"}, {"target", 10}})["error"], "NoCoordinator");
  EXPECT_EQ(admin(m.admin_port(), {{"op", "nope"}})["ok"], false);
  EXPECT_EQ(admin(m.admin_port(), {{"op", "ticket"}, {"id", 77}})["ok"], false);

  RawClient c(m.port());
  c.send({wire::MsgType::Heartbeat, 1, 1, {}});
  ASSERT_TRUE(c.receive());
  EXPECT_EQ(admin(m.admin_port(), {{"op", "sessions"}})["sessions"].size(), 1u);
  const auto sent = admin(m.admin_port(), {{"op", "send_command"}, {"target", 10}, {"opcode", "off"}});
  ASSERT_TRUE(sent["ok"]) << sent.dump();
  const auto cmd = c.receive();
  ASSERT_TRUE(cmd);
  EXPECT_EQ(wire::decode_command(cmd->payload).opcode, wire::Opcode::SwitchOff);
  c.send({wire::MsgType::Ack, cmd->seq, 10, {}});
  const auto id = sent["ticket"]["ticket_id"].get<std::uint64_t>();
  EXPECT_EQ(m.wait_ticket(id, 2000ms).state, TicketState::Acked);
  EXPECT_EQ(admin(m.admin_port(), {{"op", "ticket"}, {"id", id}})["ticket"]["state"], "acked");
  m.stop();
}
