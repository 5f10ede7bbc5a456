#include "kdnsim/env_bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "kdnsim/errors.hpp"

namespace kdnsim::bridge {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 7> kKindNames{{
    {MessageKind::Hello, "hello"},
    {MessageKind::Reset, "reset"},
    {MessageKind::ResetAck, "reset_ack"},
    {MessageKind::Step, "step"},
    {MessageKind::StepAck, "step_ack"},
    {MessageKind::Close, "close"},
    {MessageKind::Error, "error"},
}};

}  // namespace

std::string_view to_string(MessageKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<MessageKind> message_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames)
    if (name == s) return k;
  return std::nullopt;
}

std::string encode_frame(const Json& body) {
  const std::string text = body.dump();
  if (text.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  const auto n = static_cast<std::uint32_t>(text.size());
  std::string out;
  out.reserve(4 + text.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += text;
  return out;
}

namespace {

bool is_non_negative_integer(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::uint32_t read_be32(std::string_view b) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3]));
}

}  // namespace

Json decode_frame(std::string_view bytes) {
  if (bytes.size() < 4) throw ProtocolError("frame shorter than its length prefix");
  const std::uint32_t n = read_be32(bytes);
  if (n > kMaxFrameBytes) throw ProtocolError("frame too large");
  if (bytes.size() != 4 + static_cast<std::size_t>(n))
    throw ProtocolError("frame length prefix does not match its body");
  Json body = Json::parse(bytes.substr(4), nullptr, /*allow_exceptions=*/false);
  if (body.is_discarded()) throw ProtocolError("frame body is not valid JSON");
  if (!body.is_object()) throw ProtocolError("frame body must be a JSON object");
  return body;
}

Json to_json(const BridgeMessage& msg) {
  Json body = msg.payload.is_null() ? Json::object() : msg.payload;
  if (!body.is_object()) throw ProtocolError("payload must be an object");
  body["kind"] = std::string(to_string(msg.kind));
  body["id"] = msg.id;
  return body;
}

BridgeMessage from_json(const Json& body) {
  if (!body.is_object()) throw ProtocolError("message must be a JSON object");
  const auto kind_it = body.find("kind");
  if (kind_it == body.end() || !kind_it->is_string()) throw ProtocolError("message has no 'kind'");
  const auto kind = message_kind_from_string(kind_it->get<std::string>());
  if (!kind) throw ProtocolError("unknown message kind '" + kind_it->get<std::string>() + "'");
  const auto id_it = body.find("id");
  if (id_it == body.end() || !is_non_negative_integer(*id_it))
    throw ProtocolError("message has no unsigned integer 'id'");
  BridgeMessage msg;
  msg.kind = *kind;
  msg.id = id_it->get<std::uint64_t>();
  msg.payload = body;
  msg.payload.erase("kind");
  msg.payload.erase("id");
  return msg;
}

std::string encode_message(const BridgeMessage& msg) { return encode_frame(to_json(msg)); }

BridgeMessage decode_message(std::string_view frame_bytes) {
  return from_json(decode_frame(frame_bytes));
}

Json observation_to_json(const TelemetrySample& t) {
  Json arr = Json::array();
  for (double v : feature_vector(t)) arr.push_back(v);
  return arr;
}

TelemetrySample observation_from_json(const Json& obs, int ue_id) {
  if (!obs.is_array() || obs.size() != kFeatureCount)
    throw ProtocolError("observation must be an array of " + std::to_string(kFeatureCount) + " numbers");
  std::array<double, kFeatureCount> x{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (!obs[f].is_number()) throw ProtocolError("observation entries must be numbers");
    x[f] = obs[f].get<double>();
  }
  TelemetrySample t;
  t.ue_id = ue_id;
  t.packet_loss = x[0];
  t.latency_ms = x[1];
  t.throughput_bps = x[2];
  t.speed_mps = x[3];
  t.distance_to_serving_m = x[4];
  t.serving_load_ratio = x[5];
  return t;
}

Json space_descriptor(const Scenario& sc) {
  Json features = Json::array();
  for (auto name : kFeatureNames) features.push_back(std::string(name));
  double max_demand = sc.traffic.demand_max_bps;
  const double diagonal = std::hypot(sc.mobility.area.width_m, sc.mobility.area.height_m);
  // null marks an unbounded side.
  Json low = Json::array({0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  Json high = Json::array({1.0, nullptr, max_demand, nullptr, diagonal, nullptr});
  Json actions = Json::array();
  for (auto name : kActionNames) actions.push_back(std::string(name));
  return Json{
      {"version", std::string(kProtocolVersion)},
      {"observation_space", {{"features", features}, {"low", low}, {"high", high}}},
      {"action_space", {{"n", kActionCount}, {"actions", actions}}},
      {"ue_count", sc.ue_count},
      {"ticks_per_episode", sc.hyper.ticks_per_episode},
  };
}

BridgeMessage make_error(std::uint64_t id, const std::string& message, bool fatal) {
  return {MessageKind::Error, id, Json{{"message", message}, {"fatal", fatal}}};
}

BridgeSession::BridgeSession(Scenario scenario) : scenario_(std::move(scenario)) {
  validate(scenario_);
}

BridgeMessage BridgeSession::handle_frame(std::string_view frame_bytes, bool& close_after) {
  BridgeMessage req;
  try {
    req = decode_message(frame_bytes);
  } catch (const ProtocolError& e) {
    close_after = true;
    return make_error(0, std::string("malformed message: ") + e.what(), true);
  }
  return handle(req, close_after);
}

BridgeMessage BridgeSession::handle(const BridgeMessage& req, bool& close_after) {
  close_after = false;
  if (last_id_ && req.id <= *last_id_) {
    close_after = true;
    return make_error(req.id, "message ids must strictly increase", true);
  }
  last_id_ = req.id;

  try {
    switch (req.kind) {
      case MessageKind::Hello:
        return on_hello(req, close_after);
      case MessageKind::Reset:
        if (!hello_done_) break;
        return on_reset(req);
      case MessageKind::Step:
        if (!hello_done_) break;
        return on_step(req);
      case MessageKind::Close:
        close_after = true;
        return {MessageKind::Close, req.id, Json::object()};
      default:
        close_after = true;
        return make_error(req.id, "unexpected message kind '" + std::string(to_string(req.kind)) + "'", true);
    }
  } catch (const ProtocolError& e) {
    close_after = true;
    return make_error(req.id, std::string("malformed message: ") + e.what(), true);
  } catch (const Json::exception& e) {
    close_after = true;
    return make_error(req.id, std::string("malformed message: ") + e.what(), true);
  }
  close_after = true;
  return make_error(req.id, "hello required first", true);
}

BridgeMessage BridgeSession::on_hello(const BridgeMessage& req, bool& close_after) {
  const auto it = req.payload.find("version");
  if (it == req.payload.end() || !it->is_string()) throw ProtocolError("hello needs 'version'");
  if (it->get<std::string>() != kProtocolVersion) {
    close_after = true;
    return make_error(req.id,
                      "version mismatch: server speaks " + std::string(kProtocolVersion) +
                          ", client sent " + it->get<std::string>(),
                      true);
  }
  hello_done_ = true;
  return {MessageKind::Hello, req.id, space_descriptor(scenario_)};
}

BridgeMessage BridgeSession::on_reset(const BridgeMessage& req) {
  std::uint64_t seed = scenario_.seed;
  if (const auto it = req.payload.find("seed"); it != req.payload.end() && !it->is_null()) {
    if (!is_non_negative_integer(*it)) throw ProtocolError("'seed' must be a non-negative integer");
    seed = it->get<std::uint64_t>();
  }
  env_.emplace(scenario_, seed);
  Json body{{"tick", env_->tick()}, {"done", env_->done()}};
  if (env_->done()) {
    body["ue_id"] = nullptr;
    body["observation"] = nullptr;
  } else {
    const int ue = env_->begin_tick();
    body["ue_id"] = ue;
    body["observation"] = observation_to_json(env_->observe(ue));
  }
  return {MessageKind::ResetAck, req.id, body};
}

BridgeMessage BridgeSession::on_step(const BridgeMessage& req) {
  const auto ue_it = req.payload.find("ue_id");
  const auto act_it = req.payload.find("action");
  if (ue_it == req.payload.end() || !ue_it->is_number_integer())
    throw ProtocolError("step needs integer 'ue_id'");
  if (act_it == req.payload.end() || !act_it->is_number_integer())
    throw ProtocolError("step needs integer 'action'");
  const auto action = act_it->get<std::int64_t>();
  if (action < 0 || action >= kActionCount) throw ProtocolError("action ordinal out of range");

  if (!env_) return make_error(req.id, "no episode: send reset first", false);
  if (env_->done()) return make_error(req.id, "episode finished", false);
  if (ue_it->get<std::int64_t>() != env_->acting_ue())
    return make_error(req.id,
                      "ue_id " + std::to_string(ue_it->get<std::int64_t>()) +
                          " is not the acting UE " + std::to_string(env_->acting_ue()),
                      false);

  const StepOutcome step = env_->act(action_from_ordinal(static_cast<int>(action)));
  Json body{
      {"ue_id", step.ue_id},
      {"observation", observation_to_json(step.observation)},
      {"reward", step.reward},
      {"done", env_->done()},
      {"info",
       {{"tick", env_->tick() - 1},
        {"handover", step.handover},
        {"power_changed", step.power_changed},
        {"throughput_bps", step.kpis.aggregate_throughput_bps},
        {"latency_ms", step.kpis.mean_latency_ms},
        {"packet_loss", step.kpis.mean_packet_loss}}},
  };
  if (env_->done()) {
    body["next_ue_id"] = nullptr;
    body["next_observation"] = nullptr;
  } else {
    const int next = env_->begin_tick();
    body["next_ue_id"] = next;
    body["next_observation"] = observation_to_json(env_->observe(next));
  }
  return {MessageKind::StepAck, req.id, body};
}

// --- sockets -----------------------------------------------------------------

namespace {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = o.release();
    }
    return *this;
  }
  int get() const { return fd_; }
  int release() {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("send failed: " + errno_text());
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Reads exactly n bytes. Returns false on EOF before the first byte.
bool read_exact(int fd, char* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("recv failed: " + errno_text());
    }
    if (r == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

/// Whole frame (prefix included), or nullopt on orderly EOF.
std::optional<std::string> read_frame(int fd) {
  std::string frame(4, '\0');
  if (!read_exact(fd, frame.data(), 4)) return std::nullopt;
  const std::uint32_t n = read_be32(frame);
  if (n > kMaxFrameBytes) throw ProtocolError("frame too large");
  frame.resize(4 + n);
  if (n > 0 && !read_exact(fd, frame.data() + 4, n)) throw ProtocolError("connection closed mid-frame");
  return frame;
}

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw IoError("invalid IPv4 address '" + host + "'");
  return addr;
}

}  // namespace

void serve(const Scenario& scenario, const ServeOptions& opts) {
  auto log = [&](const std::string& m) {
    if (opts.log) opts.log(m);
  };
  if (opts.port < 0 || opts.port > 65535) throw IoError("port out of range");
  BridgeSession session(scenario);

  Fd listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (listener.get() < 0) throw IoError("socket failed: " + errno_text());
  sockaddr_in addr = make_addr(opts.host, opts.port);
  if (::bind(listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw IoError("cannot bind " + opts.host + ":" + std::to_string(opts.port) + ": " + errno_text());
  if (::listen(listener.get(), 1) != 0) throw IoError("listen failed: " + errno_text());
  socklen_t len = sizeof addr;
  ::getsockname(listener.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  log("listening on " + opts.host + ":" + std::to_string(port));
  if (opts.on_listening) opts.on_listening(port);

  Fd client;
  for (;;) {
    client = Fd(::accept(listener.get(), nullptr, nullptr));
    if (client.get() >= 0) break;
    if (errno != EINTR) throw IoError("accept failed: " + errno_text());
  }
  int one = 1;
  ::setsockopt(client.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  log("client connected");

  for (;;) {
    std::optional<std::string> frame;
    try {
      frame = read_frame(client.get());
    } catch (const ProtocolError& e) {
      log(std::string("dropping client: ") + e.what());
      try {
        write_all(client.get(), encode_message(make_error(0, std::string("malformed message: ") + e.what(), true)));
      } catch (const IoError&) {
      }
      break;
    }
    if (!frame) {
      log("client disconnected");
      break;
    }
    bool close_after = false;
    const BridgeMessage reply = session.handle_frame(*frame, close_after);
    write_all(client.get(), encode_message(reply));
    if (close_after) {
      log(reply.kind == MessageKind::Close ? "client closed session"
                                           : "closing after error: " + reply.payload.value("message", ""));
      break;
    }
  }
}

BridgeClient::BridgeClient(const std::string& host, int port) {
  Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (fd.get() < 0) throw IoError("socket failed: " + errno_text());
  sockaddr_in addr = make_addr(host, port);
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw IoError("cannot connect to " + host + ":" + std::to_string(port) + ": " + errno_text());
  int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  fd_ = fd.release();
}

BridgeClient::~BridgeClient() {
  if (fd_ >= 0) ::close(fd_);
}

void BridgeClient::send_raw(std::string_view bytes) { write_all(fd_, bytes); }

std::optional<std::string> BridgeClient::receive_raw() { return read_frame(fd_); }

BridgeMessage BridgeClient::request(MessageKind kind, Json payload) {
  send_raw(encode_message({kind, next_id_++, std::move(payload)}));
  auto frame = receive_raw();
  if (!frame) throw ProtocolError("server closed the connection");
  return decode_message(*frame);
}

}  // namespace kdnsim::bridge
