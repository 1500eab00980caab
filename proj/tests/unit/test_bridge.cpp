#include <gtest/gtest.h>

#include "traceneat/bridge.hpp"
#include "traceneat/builtin_games.hpp"

#ifdef TRACENEAT_HAVE_HTTPLIB
#include "traceneat/http_bridge.hpp"
#endif

using namespace traceneat;
using namespace traceneat::bridge;

namespace {

InputMessage input(std::uint64_t seq, InputType t, std::string key = {}, double x = 0, double y = 0) {
  InputMessage m;
  m.seq = seq;
  m.type = t;
  m.key = std::move(key);
  m.x = x;
  m.y = y;
  return m;
}

}  // namespace

TEST(Framing, RoundTripBothMessageTypes) {
  FrameMessage f;
  f.tick = 12;
  f.sprites = {{"ball", 1.5, -2, 45, 1, 80, true}};
  f.globals = {{"score", 3}};
  auto start = input(1, InputType::Start);
  start.seed = 18446744073709551615ULL;
  const std::vector<Message> msgs{f, input(2, InputType::KeyDown, "left"), input(3, InputType::MouseMove, {}, 10, -20),
                                  start, input(4, InputType::Stop)};
  std::string stream;
  for (const auto& m : msgs) stream += encode(m);
  EXPECT_EQ(decode_all(stream), msgs);
}

TEST(Framing, LengthPrefixCountsBytes) {
  const auto s = encode(input(1, InputType::Stop));
  const auto nl = s.find('\n');
  EXPECT_EQ(std::stoul(s.substr(0, nl)), s.size() - nl - 1);
  EXPECT_NE(s.find("\"v\":1"), std::string::npos);
}

TEST(Framing, PartialFeedsReassemble) {
  const auto s = encode(input(7, InputType::KeyUp, "space")) + encode(input(8, InputType::MouseClick, {}, 1, 2));
  Decoder d;
  std::vector<Message> got;
  for (char c : s) {
    auto out = d.feed(std::string_view(&c, 1));
    got.insert(got.end(), out.begin(), out.end());
  }
  ASSERT_EQ(got.size(), 2u);
  EXPECT_TRUE(d.idle());
  EXPECT_EQ(std::get<InputMessage>(got[1]).type, InputType::MouseClick);
}

TEST(Framing, RejectsBadInput) {
  EXPECT_THROW(decode_all(frame({{"v", 2}, {"type", "input"}, {"seq", 1}, {"event", "stop"}})), ParseError);
  EXPECT_THROW(decode_all(frame({{"type", "input"}, {"seq", 1}, {"event", "stop"}})), ParseError);
  EXPECT_THROW(decode_all(frame({{"v", 1}, {"type", "hello"}})), ParseError);
  EXPECT_THROW(decode_all(frame({{"v", 1}, {"type", "input"}, {"seq", 1}, {"event", "jump"}})), ParseError);
  EXPECT_THROW(decode_all(frame({{"v", 1}, {"type", "input"}, {"seq", 1}, {"event", "key_down"}})), ParseError);
  EXPECT_THROW(decode_all("5\nabc"), ParseError);
  EXPECT_THROW(decode_all("x\n{}"), ParseError);
  EXPECT_THROW(decode_all("3\n{}"), ParseError);  // truncated: "{}" is only 2 bytes
  EXPECT_THROW(decode_all("99999999999\n"), ParseError);
}

TEST(Framing, UnknownFieldsIgnored) {
  const auto msgs = decode_all(frame({{"v", 1}, {"type", "input"}, {"seq", 4}, {"event", "stop"}, {"extra", 1}}));
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(std::get<InputMessage>(msgs[0]).seq, 4u);
}

TEST(Coordinates, CanvasCornersMapToStage) {
  EXPECT_EQ(pixel_to_logical(0, 0), std::make_pair(-240.0, 180.0));
  EXPECT_EQ(pixel_to_logical(480, 360), std::make_pair(240.0, -180.0));
  EXPECT_EQ(pixel_to_logical(240, 180), std::make_pair(0.0, 0.0));
  EXPECT_EQ(pixel_to_logical(960, 0, 960, 720), std::make_pair(240.0, 180.0));
}

TEST(Conversion, EventRoundTrip) {
  const auto e = InputEvent::mouse_click(3, -4, 9);
  EXPECT_EQ(to_event(from_event(e, 1), 9), e);
  EXPECT_THROW(to_event(input(1, InputType::Start), 0), UsageError);
  EXPECT_THROW(from_event(InputEvent{}, 1), UsageError);
}

TEST(Session, ScriptedSessionMatchesDirectRecording) {
  const auto spec = builtin_game("FruitCatch");
  RecorderConfig cfg;
  cfg.noop_threshold = 10;
  Session s(spec, cfg);
  auto start = input(1, InputType::Start);
  start.seed = 77;
  ASSERT_TRUE(s.handle(start));
  std::uint64_t seq = 2;
  for (int t = 0; t < 200 && s.active(); ++t) {
    if (t % 23 == 4) s.handle(input(seq++, InputType::KeyDown, t % 2 ? "left" : "right"));
    if (t % 23 == 15) {
      s.handle(input(seq++, InputType::KeyUp, "left"));
      s.handle(input(seq++, InputType::KeyUp, "right"));
    }
    const auto f = s.advance();
    ASSERT_TRUE(f);
    EXPECT_EQ(f->tick, t + 1);
  }
  if (s.active()) s.handle(input(seq++, InputType::Stop));
  ASSERT_EQ(s.dataset().sessions.size(), 1u);
  const auto& rec = s.dataset().sessions[0];
  EXPECT_EQ(rec.seed, 77u);
  // log is in arrival order with non-decreasing ticks
  for (std::size_t i = 1; i < rec.events.size(); ++i) EXPECT_LE(rec.events[i - 1].tick, rec.events[i].tick);
  const auto again = replay(spec, rec, cfg);
  EXPECT_EQ(again.snapshots.size(), rec.snapshots.size());
  EXPECT_EQ(again.covered, rec.covered);
  EXPECT_FALSE(rec.snapshots.empty());
}

TEST(Session, StaleSequenceNumbersDropped) {
  Session s(builtin_game("FruitCatch"), {});
  EXPECT_TRUE(s.handle(input(5, InputType::Start)));
  EXPECT_FALSE(s.handle(input(5, InputType::KeyDown, "left")));
  EXPECT_FALSE(s.handle(input(3, InputType::KeyDown, "left")));
  EXPECT_TRUE(s.handle(input(6, InputType::KeyDown, "left")));
}

TEST(Session, InputBeforeStartRejected) {
  Session s(builtin_game("FruitCatch"), {});
  EXPECT_FALSE(s.advance());
  EXPECT_THROW(s.handle(input(1, InputType::KeyDown, "left")), UsageError);
}

TEST(Session, RestartEndsPreviousSession) {
  Session s(builtin_game("FruitCatch"), {}, 40);
  s.handle(input(1, InputType::Start));
  s.advance();
  s.handle(input(2, InputType::Start));
  ASSERT_EQ(s.dataset().sessions.size(), 1u);
  EXPECT_EQ(s.dataset().sessions[0].end_reason, EndReason::PlayerStop);
  EXPECT_EQ(s.dataset().sessions[0].seed, 40u);
  s.disconnect();
  ASSERT_EQ(s.dataset().sessions.size(), 2u);
  EXPECT_EQ(s.dataset().sessions[1].seed, 41u);
}

TEST(Session, GameOverFrameAndSessionEnd) {
  Session s(builtin_game("PaddleBall"), {});
  s.handle(input(1, InputType::Start));
  s.handle(input(2, InputType::MouseMove, {}, -240, -150));
  std::optional<FrameMessage> last;
  for (int i = 0; i < 2000 && s.active(); ++i) last = s.advance();
  ASSERT_TRUE(last);
  EXPECT_TRUE(last->game_over);
  EXPECT_FALSE(s.active());
  ASSERT_EQ(s.dataset().sessions.size(), 1u);
  EXPECT_EQ(s.dataset().sessions[0].end_reason, EndReason::GameOver);
}

TEST(SharedSession, KeepsGameOverFrameUntilRestart) {
  SharedSession shared(builtin_game("PaddleBall"), RecorderConfig{});
  const auto first = decode_all(shared.exchange(encode(input(1, InputType::Start)) +
                                                encode(input(2, InputType::MouseMove, {}, -240, -150))));
  ASSERT_EQ(first.size(), 1u);
  for (int i = 0; i < 2000 && shared.with([](Session& s) { return s.active(); }); ++i) shared.tick();
  const auto after = decode_all(shared.exchange(""));
  ASSERT_EQ(after.size(), 1u);
  EXPECT_TRUE(std::get<FrameMessage>(after[0]).game_over);
  const auto restarted = decode_all(shared.exchange(encode(input(3, InputType::Start))));
  EXPECT_FALSE(std::get<FrameMessage>(restarted[0]).game_over);
  EXPECT_EQ(std::get<FrameMessage>(restarted[0]).tick, 0);
  EXPECT_THROW(shared.exchange(encode(FrameMessage{})), ParseError);
}

#ifdef TRACENEAT_HAVE_HTTPLIB
TEST(HttpBridge, ExchangeOverLoopback) {
  SharedSession shared(builtin_game("FruitCatch"), RecorderConfig{});
  httplib::Server server;
  install_routes(server, shared);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto start = input(1, InputType::Start);
  start.seed = 3;
  auto r = client.Post("/bridge", encode(start) + encode(input(2, InputType::KeyDown, "left")), "text/plain");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  shared.tick();
  r = client.Post("/bridge", encode(input(3, InputType::KeyUp, "left")), "text/plain");
  ASSERT_TRUE(r);
  const auto msgs = decode_all(r->body);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(std::get<FrameMessage>(msgs[0]).tick, 1);
  r = client.Post("/bridge", "garbage", "text/plain");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  r = client.Post("/disconnect", "", "text/plain");
  ASSERT_TRUE(r);
  server.stop();
  th.join();
  const auto sessions = shared.with([](Session& s) { return s.dataset().sessions; });
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_EQ(sessions[0].seed, 3u);
  ASSERT_EQ(sessions[0].events.size(), 2u);
  EXPECT_EQ(sessions[0].events[0].kind, EventKind::KeyDown);
  EXPECT_EQ(sessions[0].events[1].tick, 1);
}
#endif
