#pragma once

// Wire protocol between the browser play surface and the recorder.
//
// Every message is framed as "<byte length>\n<json payload>". Payloads carry
// "v" (protocol version, currently 1) and "type":
//
//   frame  server -> client  {"v":1,"type":"frame","tick":T,"sprites":[{"id","x","y",
//                            "heading","costume","size","visible"}],"globals":{name:value},
//                            "game_over":bool}
//   input  client -> server  {"v":1,"type":"input","seq":N,"event":E,"client_time":ms,...}
//            E = key_down|key_up (+"key"), mouse_move|mouse_click (+"x","y"),
//                start (+"seed" decimal string, optional), stop
//
// Unknown payload fields are ignored; a newer "v" is rejected.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "traceneat/core.hpp"
#include "traceneat/game.hpp"
#include "traceneat/recorder.hpp"

namespace traceneat::bridge {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxMessageBytes = 1 << 20;

struct SpriteFrame {
  std::string id;
  double x = 0, y = 0, heading = 90;
  int costume = 0;
  double size = 100;
  bool visible = true;
  friend bool operator==(const SpriteFrame&, const SpriteFrame&) = default;
};

struct FrameMessage {
  std::int64_t tick = 0;
  std::vector<SpriteFrame> sprites;
  std::vector<std::pair<std::string, double>> globals;
  bool game_over = false;
  friend bool operator==(const FrameMessage&, const FrameMessage&) = default;
};

enum class InputType : std::uint8_t { KeyDown, KeyUp, MouseMove, MouseClick, Start, Stop };

struct InputMessage {
  std::uint64_t seq = 0;
  InputType type = InputType::KeyDown;
  std::string key;
  double x = 0, y = 0;
  double client_time = 0;
  std::optional<std::uint64_t> seed;  // Start only
  friend bool operator==(const InputMessage&, const InputMessage&) = default;
};

using Message = std::variant<FrameMessage, InputMessage>;

inline const char* to_string(InputType t) {
  switch (t) {
    case InputType::KeyDown: return "key_down";
    case InputType::KeyUp: return "key_up";
    case InputType::MouseMove: return "mouse_move";
    case InputType::MouseClick: return "mouse_click";
    case InputType::Start: return "start";
    case InputType::Stop: return "stop";
  }
  return "?";
}

inline InputType input_type_from_string(const std::string& s) {
  for (auto t : {InputType::KeyDown, InputType::KeyUp, InputType::MouseMove, InputType::MouseClick, InputType::Start,
                 InputType::Stop})
    if (s == to_string(t)) return t;
  throw ParseError("unknown input event '" + s + "'");
}

inline nlohmann::json to_json(const FrameMessage& f) {
  nlohmann::json sprites = nlohmann::json::array();
  for (const auto& s : f.sprites)
    sprites.push_back({{"id", s.id},
                       {"x", s.x},
                       {"y", s.y},
                       {"heading", s.heading},
                       {"costume", s.costume},
                       {"size", s.size},
                       {"visible", s.visible}});
  nlohmann::json globals = nlohmann::json::object();
  for (const auto& [k, v] : f.globals) globals[k] = v;
  return {{"v", kProtocolVersion}, {"type", "frame"},     {"tick", f.tick},
          {"sprites", sprites},    {"globals", globals}, {"game_over", f.game_over}};
}

inline nlohmann::json to_json(const InputMessage& m) {
  nlohmann::json j = {{"v", kProtocolVersion},
                      {"type", "input"},
                      {"seq", m.seq},
                      {"event", to_string(m.type)},
                      {"client_time", m.client_time}};
  switch (m.type) {
    case InputType::KeyDown:
    case InputType::KeyUp: j["key"] = m.key; break;
    case InputType::MouseMove:
    case InputType::MouseClick:
      j["x"] = m.x;
      j["y"] = m.y;
      break;
    case InputType::Start:
      if (m.seed) j["seed"] = std::to_string(*m.seed);
      break;
    case InputType::Stop: break;
  }
  return j;
}

inline Message message_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError("message is not an object");
    if (!j.contains("v")) throw ParseError("message has no version field");
    const int v = j.at("v").get<int>();
    if (v != kProtocolVersion) throw ParseError("unsupported protocol version " + std::to_string(v));
    const auto type = j.at("type").get<std::string>();
    if (type == "frame") {
      FrameMessage f;
      f.tick = j.at("tick").get<std::int64_t>();
      for (const auto& s : j.at("sprites"))
        f.sprites.push_back({s.at("id").get<std::string>(), s.at("x").get<double>(), s.at("y").get<double>(),
                             s.at("heading").get<double>(), s.at("costume").get<int>(), s.at("size").get<double>(),
                             s.at("visible").get<bool>()});
      for (auto it = j.at("globals").begin(); it != j.at("globals").end(); ++it)
        f.globals.emplace_back(it.key(), it.value().get<double>());
      f.game_over = j.at("game_over").get<bool>();
      return f;
    }
    if (type == "input") {
      InputMessage m;
      m.seq = j.at("seq").get<std::uint64_t>();
      m.type = input_type_from_string(j.at("event").get<std::string>());
      m.client_time = j.value("client_time", 0.0);
      switch (m.type) {
        case InputType::KeyDown:
        case InputType::KeyUp:
          m.key = j.at("key").get<std::string>();
          if (m.key.empty()) throw ParseError("key event without a key");
          break;
        case InputType::MouseMove:
        case InputType::MouseClick:
          m.x = j.at("x").get<double>();
          m.y = j.at("y").get<double>();
          break;
        case InputType::Start:
          if (j.contains("seed")) m.seed = detail::parse_u64(j.at("seed").get<std::string>(), 10);
          break;
        case InputType::Stop: break;
      }
      return m;
    }
    throw ParseError("unknown message type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed message: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ParseError("malformed number in message");
  } catch (const std::out_of_range&) {
    throw ParseError("number out of range in message");
  }
}

/// "<len>\n<payload>"
inline std::string frame(const nlohmann::json& payload) {
  const auto body = payload.dump();
  return std::to_string(body.size()) + "\n" + body;
}

inline std::string encode(const Message& m) {
  return std::visit([](const auto& x) { return frame(to_json(x)); }, m);
}

/// Incremental decoder for a byte stream of framed messages.
class Decoder {
 public:
  /// Appends bytes and returns every message completed by them.
  std::vector<Message> feed(std::string_view bytes) {
    buf_.append(bytes);
    std::vector<Message> out;
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl == std::string::npos) {
        if (buf_.size() > 20) throw ParseError("frame header too long");
        break;
      }
      const auto header = buf_.substr(0, nl);
      if (header.empty() || header.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError("bad frame length '" + header + "'");
      if (header.size() > 10) throw ParseError("frame length too large");
      const auto len = std::stoull(header);
      if (len > kMaxMessageBytes) throw ParseError("frame length too large");
      if (buf_.size() < nl + 1 + len) break;
      const auto body = buf_.substr(nl + 1, len);
      buf_.erase(0, nl + 1 + len);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("frame payload is not JSON: ") + e.what());
      }
      out.push_back(message_from_json(j));
    }
    return out;
  }
  bool idle() const { return buf_.empty(); }

 private:
  std::string buf_;
};

inline std::vector<Message> decode_all(std::string_view bytes) {
  Decoder d;
  auto out = d.feed(bytes);
  if (!d.idle()) throw ParseError("truncated frame at end of stream");
  return out;
}

inline FrameMessage make_frame(const GameInstance& g) {
  FrameMessage f;
  f.tick = g.tick();
  const auto& spec = g.spec();
  const auto& st = g.state();
  for (std::size_t i = 0; i < spec.sprites().size(); ++i) {
    const auto& s = st.sprites[i];
    f.sprites.push_back({spec.sprites()[i].name, s.x, s.y, s.heading, s.costume, s.size, s.visible});
  }
  for (std::size_t i = 0; i < spec.globals().size(); ++i) f.globals.emplace_back(spec.globals()[i].name, st.globals[i]);
  f.game_over = g.is_game_over();
  return f;
}

inline InputEvent to_event(const InputMessage& m, std::int64_t tick) {
  switch (m.type) {
    case InputType::KeyDown: return InputEvent::key_down(m.key, tick);
    case InputType::KeyUp: return InputEvent::key_up(m.key, tick);
    case InputType::MouseMove: return InputEvent::mouse_move(m.x, m.y, tick);
    case InputType::MouseClick: return InputEvent::mouse_click(m.x, m.y, tick);
    default: throw UsageError("to_event: control message has no input event");
  }
}

inline InputMessage from_event(const InputEvent& e, std::uint64_t seq) {
  InputMessage m;
  m.seq = seq;
  switch (e.kind) {
    case EventKind::KeyDown: m.type = InputType::KeyDown; break;
    case EventKind::KeyUp: m.type = InputType::KeyUp; break;
    case EventKind::MouseMove: m.type = InputType::MouseMove; break;
    case EventKind::MouseClick: m.type = InputType::MouseClick; break;
    case EventKind::NoOp: throw UsageError("from_event: no-ops are not sent over the bridge");
  }
  m.key = e.key;
  m.x = e.x;
  m.y = e.y;
  return m;
}

/// Canvas pixel (origin top-left, y down) to logical stage units.
inline std::pair<double, double> pixel_to_logical(double px, double py, double width = 480, double height = 360) {
  return {px / width * 2 * kCanvasHalfWidth - kCanvasHalfWidth, kCanvasHalfHeight - py / height * 2 * kCanvasHalfHeight};
}

/// Recorder side of the bridge. Not thread-safe; callers serialize access.
/// Inputs arriving between two `advance()` calls are delivered on the same
/// tick, in sequence order.
class Session {
 public:
  Session(std::shared_ptr<const GameSpec> spec, RecorderConfig config, std::uint64_t default_seed = 0)
      : spec_(spec), recorder_(spec, config), dataset_(make_dataset(*spec, config)), next_seed_(default_seed) {}

  /// Applies one input message. Returns false for a stale or duplicate seq.
  bool handle(const InputMessage& m) {
    if (last_seq_ && m.seq <= *last_seq_) return false;
    last_seq_ = m.seq;
    switch (m.type) {
      case InputType::Start:
        if (recorder_.active()) finish(EndReason::PlayerStop);
        recorder_.begin_session(m.seed ? *m.seed : next_seed_++);
        break;
      case InputType::Stop:
        if (recorder_.active()) finish(EndReason::PlayerStop);
        break;
      default:
        if (!recorder_.active()) throw UsageError("bridge: input before session start");
        recorder_.on_event(to_event(m, recorder_.now()));
    }
    return true;
  }

  /// Steps the engine one tick. Ends the session on game over. Returns the
  /// frame after the step, or nothing when no session is active.
  std::optional<FrameMessage> advance() {
    if (!recorder_.active()) return std::nullopt;
    recorder_.tick();
    auto f = make_frame(recorder_.game());
    if (recorder_.game_over()) finish(EndReason::GameOver);
    return f;
  }

  /// Client went away mid-session.
  void disconnect() {
    if (recorder_.active()) finish(EndReason::PlayerStop);
    last_seq_.reset();
  }

  std::optional<FrameMessage> current_frame() const {
    if (!recorder_.active()) return std::nullopt;
    return make_frame(recorder_.game());
  }
  bool active() const { return recorder_.active(); }
  const TrainingDataset& dataset() const { return dataset_; }
  TrainingDataset& dataset() { return dataset_; }

 private:
  void finish(EndReason r) { dataset_.sessions.push_back(recorder_.end_session(r)); }

  std::shared_ptr<const GameSpec> spec_;
  Recorder recorder_;
  TrainingDataset dataset_;
  std::uint64_t next_seed_;
  std::optional<std::uint64_t> last_seq_;
};

/// Session plus a mutex; the transport thread calls `exchange` and a timer
/// thread calls `tick`.
class SharedSession {
 public:
  template <typename... A>
  explicit SharedSession(A&&... a) : session_(std::forward<A>(a)...) {}

  /// Decodes a request body of framed inputs, applies them, and returns the
  /// latest frame (framed), or an empty string when no session runs.
  std::string exchange(std::string_view body) {
    const auto msgs = decode_all(body);
    std::lock_guard lock(mu_);
    bool restarted = false;
    for (const auto& m : msgs) {
      if (!std::holds_alternative<InputMessage>(m)) throw ParseError("client sent a frame message");
      const auto& in = std::get<InputMessage>(m);
      if (session_.handle(in) && in.type == InputType::Start) restarted = true;
    }
    // keep the final game-over frame until the next start
    if (restarted || !latest_) latest_ = session_.current_frame();
    return latest_ ? encode(*latest_) : std::string();
  }
  void tick() {
    std::lock_guard lock(mu_);
    if (auto f = session_.advance()) latest_ = std::move(f);
  }
  void disconnect() {
    std::lock_guard lock(mu_);
    session_.disconnect();
  }
  template <typename F>
  auto with(F&& f) {
    std::lock_guard lock(mu_);
    return f(session_);
  }

 private:
  std::mutex mu_;
  Session session_;
  std::optional<FrameMessage> latest_;
};

}  // namespace traceneat::bridge
