// homewsn: command-line front end for routing, simulation and the
// monitoring service.
//
// Exit codes: 0 success, 1 domain error, 2 usage error, 3 I/O or protocol error.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <boost/asio.hpp>
#include <nlohmann/json.hpp>

#include "homewsn/cid.hpp"
#include "homewsn/experiment.hpp"
#include "homewsn/fixtures.hpp"
#include "homewsn/gateway.hpp"
#include "homewsn/monitor.hpp"
#include "homewsn/routing.hpp"
#include "homewsn/simnet.hpp"
#include "homewsn/topology_io.hpp"

namespace {

using namespace homewsn;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kIo = 3;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An empty path selects the built-in reference table.
Topology open_topology(const std::string& path) {
  if (path.empty()) return fixtures::table1_topology();
  try {
    return load_topology(path);
  } catch (const Error& e) {
    throw IoFailure(path + ": " + e.what());
  }
}

CountingMode parse_mode(const std::string& s) {
  return s == "all" ? CountingMode::AllPathNodes : CountingMode::TransmittersOnly;
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// route ---------------------------------------------------------------------

struct RouteArgs {
  std::string topology;
  int from = 1;
  int to = 1;
  double k = 5;
  bool oracle = false;
};

int cmd_route(const RouteArgs& a) {
  const Topology topo = open_topology(a.topology);
  const RouteQuery q{NodeId{a.from}, NodeId{a.to}, a.k};
  const auto r = try_find_optimal_path(topo.table(), q);
  if (a.oracle) {
    const auto o = try_brute_force_route(topo.table(), q);
    if (r != o) {
      std::cerr << "oracle divergence\n";
      return kDomain;
    }
    std::cout << "oracle agrees\n";
  }
  if (!r) {
    std::cerr << "NoPath: node " << a.to << " unreachable from node " << a.from << " with k=" << a.k << "\n";
    return kDomain;
  }
  std::cout << "path " << join_ids(r->path) << "\n"
            << "dist " << fmt_num(r->dist) << "\n"
            << "hops " << r->hops << "\n";
  return kOk;
}

// discover ------------------------------------------------------------------

int cmd_discover(const std::string& path, int root, bool show_trace) {
  const Topology topo = open_topology(path);
  sim::EventTrace trace;
  const auto res = sim::run_discovery(topo, NodeId{root}, &trace);
  std::cout << "message_count " << res.message_count << "\n";
  std::cout << "matches_ground_truth " << (res.table == topo.table() ? "yes" : "no") << "\n";
  for (std::size_t i = 0; i < res.table.size(); ++i) {
    for (std::size_t j = 0; j < res.table.size(); ++j) std::cout << (j ? "," : "") << fmt_num(res.table.at(i, j));
    std::cout << "\n";
  }
  if (show_trace) std::cout << trace.str();
  return kOk;
}

// simulate / profile ----------------------------------------------------------

struct SimArgs {
  std::string topology;
  double k = 5;
  std::uint64_t n = 1000;
  std::uint64_t seed = 0;
  std::string mode = "transmitters";
  std::string out = "visits.csv";
};

int cmd_simulate(const SimArgs& a) {
  const Topology topo = open_topology(a.topology);
  const auto t0 = std::chrono::steady_clock::now();
  sim::SimConfig cfg{a.k, a.n, a.seed, parse_mode(a.mode)};
  const ExperimentReport rep = run_experiment(topo, cfg);

  std::ofstream csv(a.out, std::ios::binary);
  if (!csv) throw IoFailure("cannot write " + a.out);
  csv << visits_csv(rep);
  if (!csv) throw IoFailure("write to " + a.out + " failed");

  std::cout << format_report(rep);
  sim::SimConfig other = cfg;
  other.mode = cfg.mode == CountingMode::AllPathNodes ? CountingMode::TransmittersOnly : CountingMode::AllPathNodes;
  std::cout << "counts_" << to_string(other.mode) << " " << join_counts(sim::run_traffic(topo, other).counts) << "\n";
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "runtime_ms " << ms << "\n";
  return kOk;
}

int cmd_profile(const std::string& path, double k) {
  const Topology topo = open_topology(path);
  const VisitStats tx = all_pairs_profile(topo.table(), k, CountingMode::TransmittersOnly);
  const VisitStats all = all_pairs_profile(topo.table(), k, CountingMode::AllPathNodes);
  auto top = [](const std::vector<std::uint64_t>& c) {
    auto r = rank_nodes(c);
    r.resize(std::min<std::size_t>(3, r.size()));
    return r;
  };
  std::cout << "pairs " << tx.transmissions << "\n"
            << "unreachable " << tx.unreachable << "\n"
            << "counts_transmitters " << join_counts(tx.counts) << "\n"
            << "counts_all " << join_counts(all.counts) << "\n"
            << "relay_counts " << join_counts(tx.relay_counts) << "\n"
            << "top3_relay " << join_ids(top(tx.relay_counts)) << "\n"
            << "top3_transmitters " << join_ids(top(tx.counts)) << "\n";
  return kOk;
}

// cid -----------------------------------------------------------------------

int cmd_cid(const std::string& digits, bool checksum) {
  if (checksum) {
    std::cout << cid::cid_checksum(digits) << "\n";
    return kOk;
  }
  const cid::CidEvent ev = cid::decode_cid(digits);
  std::cout << "account " << ev.account << "\n"
            << "message_type " << ev.message_type << "\n"
            << "qualifier " << cid::to_string(ev.qualifier) << "\n"
            << "event_code " << ev.event_code << "\n"
            << "partition " << ev.partition << "\n"
            << "zone " << ev.zone << "\n";
  return kOk;
}

// service ---------------------------------------------------------------------

std::atomic<bool> g_stop{false};

int cmd_serve(monitor::MonitorConfig cfg) {
  monitor::Monitor m(cfg);
  m.start();
  std::cerr << "listening on " << cfg.host << ":" << m.port() << " (admin " << m.admin_port() << ")\n";
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  m.stop();
  return kOk;
}

json admin_call(const std::string& host, std::uint16_t port, const json& req) {
  namespace asio = boost::asio;
  try {
    asio::io_context io;
    asio::ip::tcp::socket sock(io);
    asio::connect(sock, asio::ip::tcp::resolver(io).resolve(host, std::to_string(port)));
    const std::string line = req.dump() + "\n";
    asio::write(sock, asio::buffer(line));
    std::string in;
    const std::size_t n = asio::read_until(sock, asio::dynamic_buffer(in), '\n');
    return json::parse(in.substr(0, n));
  } catch (const std::exception& e) {
    throw IoFailure(std::string("admin request failed: ") + e.what());
  }
}

int print_admin(const json& resp) {
  if (!resp.value("ok", false)) {
    std::cerr << resp.value("message", resp.value("error", std::string("error"))) << "\n";
    return kDomain;
  }
  if (resp.contains("records")) {
    for (const auto& r : resp["records"]) std::cout << r.dump() << "\n";
    if (resp.contains("next_cursor") && !resp["next_cursor"].is_null()) {
      std::cout << "{\"next_cursor\":" << resp["next_cursor"].dump() << "}\n";
    }
  } else {
    std::cout << resp.dump() << "\n";
  }
  return kOk;
}

int cmd_send_command(const std::string& host, std::uint16_t port, int target, const std::string& opcode, int wait_ms) {
  json resp = admin_call(host, port, {{"op", "send_command"}, {"target", target}, {"opcode", opcode}});
  if (!resp.value("ok", false)) return print_admin(resp);
  const auto id = resp["ticket"]["ticket_id"].get<std::uint64_t>();
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(wait_ms);
  for (;;) {
    const std::string state = resp["ticket"]["state"].get<std::string>();
    if (state == "acked" || state == "nacked" || state == "timed_out" || std::chrono::steady_clock::now() > deadline) {
      std::cout << resp["ticket"].dump() << "\n";
      return state == "acked" ? kOk : kDomain;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    resp = admin_call(host, port, {{"op", "ticket"}, {"id", id}});
  }
}

// demo ----------------------------------------------------------------------

struct DemoArgs {
  double k = 5;
  std::string host = "127.0.0.1";
  std::uint16_t port = 7007;
  std::uint16_t admin_port = 7008;
  std::string topology;
  std::string store;
  std::string trace;
  std::uint64_t seed = 1;
  std::size_t ticks = 240;
  int target = 10;
};

monitor::HistoryFilter kind_filter(monitor::RecordKind kind) {
  monitor::HistoryFilter f;
  f.kind = kind;
  return f;
}

int cmd_demo(const DemoArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Topology topo = open_topology(a.topology);

  std::filesystem::path store = a.store;
  const bool temp_store = store.empty();
  if (temp_store) {
    store = std::filesystem::temp_directory_path() /
            ("homewsn-demo-" + std::to_string(::getpid()) + ".log");
    std::filesystem::remove(store);
  }

  monitor::MonitorConfig mc;
  mc.host = a.host;
  mc.port = a.port;
  mc.admin_port = a.admin_port;
  mc.store_path = store;
  mc.radius = a.k;
  mc.command_timeout = std::chrono::milliseconds(2000);

  int status = kDomain;
  {
    monitor::Monitor m(mc);  // StartupError on an occupied port
    m.start();
    std::cout << "monitor listening on " << a.host << ":" << m.port() << "\n";

    sim::Network net(topo, {a.k, a.seed, 60});
    std::cout << "discovery: " << net.discovery().message_count << " messages, table "
              << (net.discovery().table == topo.table() ? "matches" : "DIFFERS") << "\n";
    Gateway gw(net, a.host, m.port());
    gw.register_session();
    std::cout << "coordinator registered, k=" << fmt_num(net.radius()) << "\n";

    gw.run(a.ticks);
    const std::size_t readings = m.query_history(kind_filter(monitor::RecordKind::Reading), 100000).records.size();
    std::cout << "readings ingested: " << readings << "\n";

    const monitor::CommandTicket queued = m.dispatch_command(NodeId{a.target}, wire::Opcode::SwitchOn);
    gw.poll_downlink(std::chrono::milliseconds(1000));
    monitor::CommandTicket ticket = queued;
    for (int i = 0; i < 100 && !monitor::is_terminal(ticket.state); ++i) {
      gw.run(1);
      ticket = m.wait_ticket(queued.ticket_id, std::chrono::milliseconds(5));
    }
    ticket = m.wait_ticket(queued.ticket_id, std::chrono::milliseconds(500));
    std::cout << "command SwitchOn -> node " << a.target << ": " << monitor::to_string(ticket.state) << "\n";
    for (const auto& line : net.trace().lines()) {
      if (line.find("\troute\t") != std::string::npos) std::cout << "  " << line << "\n";
    }
    const bool switched = net.node(NodeId{a.target}).relay_switch == sim::Switch::On;
    std::cout << "node " << a.target << " relay " << (switched ? "on" : "off") << "\n";

    const std::string alarm = cid::encode_cid("1234", "18", cid::Qualifier::NewEvent, "131", "01", "015");
    net.inject_alarm(alarm);
    gw.run(3);
    const auto alarms = m.query_history(kind_filter(monitor::RecordKind::Alarm), 10).records;
    const bool alarm_ok = !alarms.empty() && alarms.back().alarm && alarms.back().alarm->event_code == "131";
    std::cout << "alarm " << alarm << ": " << (alarm_ok ? "stored, event 131" : "MISSING") << "\n";

    if (!a.trace.empty()) {
      std::ofstream(a.trace) << net.trace().str();
    }
    m.stop();
    status = (ticket.state == monitor::TicketState::Acked && switched && alarm_ok && readings > 0) ? kOk : kDomain;
  }
  if (temp_store) std::filesystem::remove(store);
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "demo " << (status == kOk ? "passed" : "failed") << " in " << static_cast<int>(ms) << " ms\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-home sensor network toolkit"};
  app.require_subcommand(1);

  RouteArgs ra;
  auto* route = app.add_subcommand("route", "Optimal path between two nodes");
  route->add_option("--topology", ra.topology, "Topology file (default: built-in reference table)");
  route->add_option("--from", ra.from, "Sending node")->required();
  route->add_option("--to", ra.to, "Receiving node")->required();
  route->add_option("--k", ra.k, "Transmission radius")->required();
  route->add_flag("--oracle", ra.oracle, "Cross-check against exhaustive enumeration");

  std::string disc_topo;
  int disc_root = 1;
  bool disc_trace = false;
  auto* discover = app.add_subcommand("discover", "Run root-initiated distance-table discovery");
  discover->add_option("--topology", disc_topo, "Topology file (default: built-in reference table)");
  discover->add_option("--root", disc_root)->capture_default_str();
  discover->add_flag("--trace", disc_trace, "Print the event trace");

  SimArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Random traffic run, writes visits.csv");
  simulate->add_option("--topology", sa.topology, "Topology file (default: built-in reference table)");
  simulate->add_option("--k", sa.k)->capture_default_str();
  simulate->add_option("--n", sa.n, "Number of transmissions")->capture_default_str();
  simulate->add_option("--seed", sa.seed)->required();
  simulate->add_option("--mode", sa.mode)->check(CLI::IsMember({"transmitters", "all"}))->capture_default_str();
  simulate->add_option("--out", sa.out)->capture_default_str();

  std::string prof_topo;
  double prof_k = 5;
  auto* profile = app.add_subcommand("profile", "Route every ordered pair once and count visits");
  profile->add_option("--topology", prof_topo, "Topology file (default: built-in reference table)");
  profile->add_option("--k", prof_k)->capture_default_str();

  std::string cid_digits;
  bool cid_sum = false;
  auto* cidcmd = app.add_subcommand("cid", "Decode a Contact-ID message");
  cidcmd->add_option("digits", cid_digits)->required();
  cidcmd->add_flag("--checksum", cid_sum, "Compute the checksum digit for 15 digits instead");

  monitor::MonitorConfig mc;
  int timeout_ms = 5000;
  std::string store_path = "monitor.log";
  auto* serve = app.add_subcommand("serve", "Run the monitoring center");
  serve->add_option("--host", mc.host)->capture_default_str();
  serve->add_option("--port", mc.port)->capture_default_str();
  serve->add_option("--admin-port", mc.admin_port)->capture_default_str();
  serve->add_option("--store", store_path)->capture_default_str();
  serve->add_option("--k", mc.radius)->capture_default_str();
  serve->add_option("--timeout-ms", timeout_ms)->capture_default_str();
  serve->add_flag("--verbose", mc.verbose);

  std::string admin_host = "127.0.0.1";
  std::uint16_t admin_port = 7008;
  auto add_admin = [&](CLI::App* sub) {
    sub->add_option("--host", admin_host)->capture_default_str();
    sub->add_option("--admin-port", admin_port)->capture_default_str();
  };

  int cmd_target = 0;
  std::string cmd_opcode = "on";
  int cmd_wait = 6000;
  auto* send = app.add_subcommand("send-command", "Dispatch a switch command and wait for the ticket");
  add_admin(send);
  send->add_option("--target", cmd_target)->required();
  send->add_option("--opcode", cmd_opcode)->check(CLI::IsMember({"on", "off", "query"}))->capture_default_str();
  send->add_option("--wait-ms", cmd_wait)->capture_default_str();

  json query_req{{"op", "query"}};
  int q_node = 0, q_limit = 100;
  std::uint64_t q_cursor = 0;
  std::string q_kind;
  auto* query = app.add_subcommand("query", "History query");
  add_admin(query);
  query->add_option("--node", q_node);
  query->add_option("--kind", q_kind)->check(CLI::IsMember({"reading", "alarm", "heartbeat"}));
  query->add_option("--limit", q_limit)->capture_default_str();
  query->add_option("--cursor", q_cursor);

  auto* snapshot = app.add_subcommand("snapshot", "Latest record per node");
  add_admin(snapshot);

  DemoArgs da;
  auto* demo = app.add_subcommand("demo", "End-to-end run: monitor, coordinator and a 10-node mesh");
  demo->add_option("--k", da.k)->capture_default_str();
  demo->add_option("--host", da.host)->capture_default_str();
  demo->add_option("--port", da.port)->capture_default_str();
  demo->add_option("--admin-port", da.admin_port)->capture_default_str();
  demo->add_option("--topology", da.topology, "Topology file (default: built-in reference table)");
  demo->add_option("--store", da.store, "Record log (default: temporary file)");
  demo->add_option("--trace", da.trace, "Write the mesh event trace here");
  demo->add_option("--seed", da.seed)->capture_default_str();
  demo->add_option("--ticks", da.ticks)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*route) return cmd_route(ra);
    if (*discover) return cmd_discover(disc_topo, disc_root, disc_trace);
    if (*simulate) return cmd_simulate(sa);
    if (*profile) return cmd_profile(prof_topo, prof_k);
    if (*cidcmd) return cmd_cid(cid_digits, cid_sum);
    if (*serve) {
      mc.store_path = store_path;
      mc.command_timeout = std::chrono::milliseconds(timeout_ms);
      return cmd_serve(mc);
    }
    if (*send) return cmd_send_command(admin_host, admin_port, cmd_target, cmd_opcode, cmd_wait);
    if (*query) {
      if (q_node) query_req["src_node"] = q_node;
      if (!q_kind.empty()) query_req["kind"] = q_kind;
      query_req["limit"] = q_limit;
      query_req["cursor"] = q_cursor;
      return print_admin(admin_call(admin_host, admin_port, query_req));
    }
    if (*snapshot) return print_admin(admin_call(admin_host, admin_port, {{"op", "snapshot"}}));
    if (*demo) return cmd_demo(da);
  } catch (const IoFailure& e) {
    std::cerr << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    switch (e.code()) {
      case Errc::IoError:
      case Errc::StartupError:
      case Errc::StoreError:
      case Errc::BadMagic:
      case Errc::UnsupportedVersion:
      case Errc::UnknownType:
      case Errc::LengthMismatch:
      case Errc::BadCrc:
      case Errc::Truncated:
        return kIo;
      default:
        return kDomain;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kIo;
  }
  return 2;
}
