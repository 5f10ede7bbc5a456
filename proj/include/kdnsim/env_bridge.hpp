#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kdnsim/sim_engine.hpp"

namespace kdnsim::bridge {

using Json = nlohmann::json;

inline constexpr std::string_view kProtocolVersion = "kdnsim/1";
/// Frames larger than this are rejected as malformed.
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

enum class MessageKind { Hello, Reset, ResetAck, Step, StepAck, Close, Error };

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view s);

/// One protocol message. On the wire it is a single JSON object holding
/// "kind", "id" and the kind-specific fields of `payload`.
struct BridgeMessage {
  MessageKind kind = MessageKind::Hello;
  std::uint64_t id = 0;
  Json payload = Json::object();

  bool operator==(const BridgeMessage&) const = default;
};

/// 4-byte big-endian length followed by compact UTF-8 JSON (sorted keys).
std::string encode_frame(const Json& body);
/// Decodes exactly one frame; throws ProtocolError otherwise.
Json decode_frame(std::string_view bytes);

Json to_json(const BridgeMessage& msg);
BridgeMessage from_json(const Json& body);

std::string encode_message(const BridgeMessage& msg);
BridgeMessage decode_message(std::string_view frame_bytes);

/// Observation as sent on the wire: six raw telemetry values in feature order.
Json observation_to_json(const TelemetrySample& t);
TelemetrySample observation_from_json(const Json& obs, int ue_id);

/// Hello reply body: protocol version, observation and action spaces.
Json space_descriptor(const Scenario& sc);

/// Transport-free protocol state machine for one connection.
class BridgeSession {
 public:
  explicit BridgeSession(Scenario scenario);

  /// Handles one request and returns the reply. Sets `close_after` when the
  /// connection must be closed once the reply is sent.
  BridgeMessage handle(const BridgeMessage& request, bool& close_after);
  /// Same, starting from raw frame bytes. Malformed input yields a fatal
  /// Error reply.
  BridgeMessage handle_frame(std::string_view frame_bytes, bool& close_after);

  bool hello_done() const { return hello_done_; }
  const std::optional<NetworkEnvironment>& environment() const { return env_; }

 private:
  BridgeMessage on_hello(const BridgeMessage& req, bool& close_after);
  BridgeMessage on_reset(const BridgeMessage& req);
  BridgeMessage on_step(const BridgeMessage& req);

  Scenario scenario_;
  std::optional<NetworkEnvironment> env_;
  std::optional<std::uint64_t> last_id_;
  bool hello_done_ = false;
};

BridgeMessage make_error(std::uint64_t id, const std::string& message, bool fatal);

struct ServeOptions {
  std::string host = "127.0.0.1";
  /// 0 asks the OS for a free port.
  int port = 0;
  /// Called once the socket is listening, with the bound port.
  std::function<void(int)> on_listening;
  std::function<void(const std::string&)> log;
};

/// Serves one client until it sends Close or disconnects. Further clients
/// wait in the listen backlog and are dropped when this returns. Throws
/// IoError when the port cannot be bound.
void serve(const Scenario& scenario, const ServeOptions& opts);

/// Blocking lockstep client, used by tests and external agents written in C++.
class BridgeClient {
 public:
  BridgeClient(const std::string& host, int port);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  /// Sends `kind` with `payload` under the next id and waits for the reply.
  BridgeMessage request(MessageKind kind, Json payload = Json::object());
  void send_raw(std::string_view bytes);
  /// Next frame from the server, or nullopt on orderly shutdown.
  std::optional<std::string> receive_raw();

 private:
  int fd_ = -1;
  std::uint64_t next_id_ = 1;
};

}  // namespace kdnsim::bridge
