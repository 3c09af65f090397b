#pragma once

// TCP uplink of an emulated coordinator: carries the datagrams of a
// sim::Network to a monitoring center and feeds commands back in.

#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <boost/asio.hpp>

#include "homewsn/monitor.hpp"
#include "homewsn/simnet.hpp"
#include "homewsn/wire.hpp"

namespace homewsn {

class Gateway {
 public:
  using clock = std::chrono::steady_clock;

  Gateway(sim::Network& net, const std::string& host, std::uint16_t port,
          std::chrono::milliseconds reply_timeout = std::chrono::milliseconds(2000))
      : net_(net), sock_(io_), reply_timeout_(reply_timeout) {
    try {
      boost::asio::ip::tcp::resolver resolver(io_);
      boost::asio::connect(sock_, resolver.resolve(host, std::to_string(port)));
    } catch (const boost::system::system_error& e) {
      throw Error(Errc::IoError, "cannot connect to " + host + ":" + std::to_string(port) + ": " + e.what());
    }
  }

  /// First heartbeat; adopts the routing radius from the reply.
  void register_session() {
    const wire::Datagram hb{wire::MsgType::Heartbeat, net_.allocate_seq(),
                            static_cast<std::uint16_t>(net_.coordinator().id().value), {}};
    const wire::Datagram reply = send_and_wait(hb);
    if (reply.type != wire::MsgType::Ack) throw Error(Errc::IoError, "registration was refused");
    if (auto k = monitor::decode_radius(reply.payload)) net_.set_radius(*k);
  }

  /// Advances the network `ticks` times, forwarding everything it sends
  /// upstream and applying whatever arrives downstream.
  void run(std::size_t ticks) {
    for (std::size_t i = 0; i < ticks; ++i) {
      drain_downlink(std::chrono::milliseconds(0));
      for (const wire::Datagram& d : net_.step()) forward(d);
    }
  }

  /// Waits up to `timeout` for at least one downlink datagram.
  bool poll_downlink(std::chrono::milliseconds timeout) {
    const std::size_t before = commands_received_;
    drain_downlink(timeout);
    return commands_received_ > before;
  }

  std::size_t acked() const { return acked_; }
  std::size_t nacked() const { return nacked_; }
  std::size_t sent() const { return sent_; }
  std::size_t commands_received() const { return commands_received_; }

 private:
  static bool expects_reply(wire::MsgType t) {
    return t == wire::MsgType::SensorData || t == wire::MsgType::AlarmCid || t == wire::MsgType::Heartbeat ||
           t == wire::MsgType::DiscoveryReport;
  }

  void forward(const wire::Datagram& d) {
    if (expects_reply(d.type)) {
      send_and_wait(d);
    } else {
      write(d);
    }
  }

  void write(const wire::Datagram& d) {
    const wire::Bytes bytes = wire::encode_datagram(d);
    boost::system::error_code ec;
    boost::asio::write(sock_, boost::asio::buffer(bytes), ec);
    if (ec) throw Error(Errc::IoError, "uplink write failed: " + ec.message());
    ++sent_;
  }

  wire::Datagram send_and_wait(const wire::Datagram& d) {
    write(d);
    const auto deadline = clock::now() + reply_timeout_;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
      auto in = next_datagram(std::max(left, std::chrono::milliseconds(0)));
      if (!in) throw Error(Errc::IoError, "no reply for seq " + std::to_string(d.seq));
      if ((in->type == wire::MsgType::Ack || in->type == wire::MsgType::Nack) && in->seq == d.seq) {
        in->type == wire::MsgType::Ack ? ++acked_ : ++nacked_;
        return *in;
      }
      apply(*in);
    }
  }

  void drain_downlink(std::chrono::milliseconds timeout) {
    auto first = next_datagram(timeout);
    if (!first) return;
    apply(*first);
    while (auto more = next_datagram(std::chrono::milliseconds(0))) apply(*more);
  }

  void apply(const wire::Datagram& d) {
    if (d.type == wire::MsgType::Command) {
      ++commands_received_;
      net_.submit(d);
    }
  }

  std::optional<wire::Datagram> next_datagram(std::chrono::milliseconds timeout) {
    for (;;) {
      if (auto d = decoder_.next()) return d;
      std::optional<boost::system::error_code> result;
      std::size_t n = 0;
      if (timeout.count() == 0) {
        boost::system::error_code ec;
        if (sock_.available(ec) == 0 || ec) return std::nullopt;
      }
      sock_.async_read_some(boost::asio::buffer(buf_), [&](boost::system::error_code ec, std::size_t len) {
        result = ec;
        n = len;
      });
      io_.restart();
      io_.run_for(timeout.count() == 0 ? std::chrono::milliseconds(100) : timeout);
      if (!result) {
        sock_.cancel();
        io_.restart();
        io_.run();
        if (!result || *result == boost::asio::error::operation_aborted) return std::nullopt;
      }
      if (*result) throw Error(Errc::IoError, "uplink read failed: " + result->message());
      decoder_.feed(std::span<const std::uint8_t>(buf_.data(), n));
    }
  }

  sim::Network& net_;
  boost::asio::io_context io_;
  boost::asio::ip::tcp::socket sock_;
  std::chrono::milliseconds reply_timeout_;
  std::array<std::uint8_t, 4096> buf_{};
  wire::StreamDecoder decoder_;
  std::size_t acked_ = 0;
  std::size_t nacked_ = 0;
  std::size_t sent_ = 0;
  std::size_t commands_received_ = 0;
};

}  // namespace homewsn
