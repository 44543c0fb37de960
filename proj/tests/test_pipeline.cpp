#include <gtest/gtest.h>

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <thread>

#include "aerovision/bounded_queue.hpp"
#include "aerovision/config.hpp"
#include "aerovision/pipeline.hpp"
#include "aerovision/rng.hpp"
#include "oracles.hpp"
#include "tcp_server.hpp"
#include "test_util.hpp"

namespace aerovision {
namespace {

using namespace std::chrono_literals;
using json = nlohmann::json;

TEST(BoundedQueue, DropOldestEvictsFront) {
  BoundedQueue<int> q(2, DropPolicy::DropOldest);
  EXPECT_EQ(q.push(1), BoundedQueue<int>::PushResult::Ok);
  q.push(2);
  EXPECT_EQ(q.push(3), BoundedQueue<int>::PushResult::DroppedOldest);
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.pop(), 3);
  const auto s = q.stats();
  EXPECT_EQ(s.dropped, 1u);
  EXPECT_EQ(s.full_events, 1u);
  EXPECT_EQ(s.high_water, 2u);
}

TEST(BoundedQueue, BlockWaitsForConsumer) {
  BoundedQueue<int> q(1, DropPolicy::Block);
  q.push(1);
  std::jthread producer([&] { q.push(2); });
  std::this_thread::sleep_for(20ms);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_EQ(q.pop(), 1);
  producer.join();
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.stats().dropped, 0u);
  EXPECT_LE(q.stats().high_water, 1u);
}

TEST(BoundedQueue, CloseWakesAndDrains) {
  BoundedQueue<int> q(1, DropPolicy::Block);
  q.push(7);
  q.close();
  EXPECT_EQ(q.push(8), BoundedQueue<int>::PushResult::Closed);
  EXPECT_EQ(q.pop(), 7);
  EXPECT_EQ(q.pop(), std::nullopt);
  expect_error(ErrorCode::InvalidArgument, [] { BoundedQueue<int>(0, DropPolicy::Block); });
}

TEST(Source, DirectoryInNameOrder) {
  TempDir dir;
  for (const char* name : {"c.png", "a.png", "b.png"}) {
    save_frame(Frame(1, 1, ChannelLayout::gray(), {static_cast<std::uint8_t>(name[0])}), dir / name);
  }
  write_text(dir / "notes.txt", "ignored");
  auto src = open_source({SourceSpec::Kind::Directory, dir.path()});
  std::vector<std::uint8_t> seen;
  std::uint64_t expect_id = 0;
  while (auto item = src->next()) {
    ASSERT_TRUE(item->frame);
    EXPECT_EQ(item->frame->frame_id, expect_id++);
    seen.push_back(item->frame->pixels()[0]);
  }
  EXPECT_EQ(seen, (std::vector<std::uint8_t>{'a', 'b', 'c'}));
}

TEST(Source, EmptyDirectoryAndMissingPath) {
  TempDir dir;
  EXPECT_FALSE(open_source({SourceSpec::Kind::Directory, dir.path()})->next());
  expect_error(ErrorCode::MissingSource, [&] { open_source({SourceSpec::Kind::Directory, dir / "nope"}); });
  expect_error(ErrorCode::MissingSource, [&] { open_source({SourceSpec::Kind::RawStream, dir / "nope.avrw"}); });
}

TEST(Source, MalformedFileBecomesErrorRecord) {
  TempDir dir;
  save_frame(Frame(1, 1, ChannelLayout::gray(), {1}), dir / "a.png");
  write_text(dir / "b.png", "not a png");
  save_frame(Frame(1, 1, ChannelLayout::gray(), {3}), dir / "c.png");
  auto src = open_source({SourceSpec::Kind::Directory, dir.path()});
  auto a = src->next(), b = src->next(), c = src->next();
  ASSERT_TRUE(a && b && c);
  EXPECT_TRUE(a->frame);
  EXPECT_FALSE(b->frame);
  EXPECT_NE(b->error.find("b.png"), std::string::npos);
  ASSERT_TRUE(c->frame);
  EXPECT_EQ(c->frame->frame_id, 1u);
  EXPECT_FALSE(src->next());
}

TEST(Source, RawStreamSkipsBadRecord) {
  TempDir dir;
  std::vector<std::uint8_t> bytes;
  for (int i = 0; i < 2; ++i) {
    const auto rec = encode_raw(Frame(2, 1, ChannelLayout::multispectral(4), std::vector<std::uint8_t>(8, static_cast<std::uint8_t>(i))));
    bytes.insert(bytes.end(), rec.begin(), rec.end());
  }
  {
    std::ofstream out(dir / "s.avrw", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  SourceSpec spec{SourceSpec::Kind::RawStream, dir / "s.avrw"};
  auto src = open_source(spec);
  auto a = src->next(), b = src->next();
  ASSERT_TRUE(a && a->frame && b && b->frame);
  EXPECT_EQ(b->frame->pixels()[0], 1);
  EXPECT_EQ(b->frame->frame_id, 1u);
  EXPECT_FALSE(src->next());

  // Declaring a 3-band layout makes each 4-band record malformed, but the
  // intact headers let the stream move past both.
  spec.layout = ChannelLayout::rgb();
  auto strict = open_source(spec);
  int errors = 0;
  while (auto item = strict->next()) errors += !item->frame;
  EXPECT_EQ(errors, 2);
}

TEST(Source, SyntheticTenFpsForOneSecond) {
  SourceSpec spec;
  spec.fps = 10;
  spec.duration_s = 1.0;
  auto src = open_source(spec);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::int64_t> ts;
  while (auto item = src->next()) ts.push_back(item->frame->timestamp_us);
  const auto wall = std::chrono::steady_clock::now() - start;
  ASSERT_EQ(ts.size(), 10u);
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_EQ(ts[i] - ts[i - 1], 100000);
  EXPECT_GE(wall, 850ms);
  EXPECT_LT(wall, 1500ms);
}

TEST(MockBackend, CyclesScriptAndChecksShape) {
  const std::vector<RawOutput> script = {ActionScores{1, 0, 0, 0, 0, 0}, ActionScores{0, 1, 0, 0, 0, 0}};
  MockBackend backend(Task::Action, 0us, script);
  for (std::uint64_t id = 0; id < 4; ++id) {
    Frame f = Frame::blank(2, 2, ChannelLayout::rgb());
    f.frame_id = id;
    EXPECT_EQ(std::get<ActionScores>(backend.infer(f))[id % 2], 1.0f);
  }
  expect_error(ErrorCode::ScriptDimensionMismatch, [] {
    MockBackend(Task::Detection, 0us, {ActionScores{}});
  });
  expect_error(ErrorCode::ScriptDimensionMismatch, [] {
    MockBackend(Task::Segmentation, 0us, {SegmentationLogits{2, 2, 2, std::vector<float>(8)}, SegmentationLogits{2, 1, 2, std::vector<float>(4)}});
  });
  backend.fail_on_frame(3);
  Frame f = Frame::blank(2, 2, ChannelLayout::rgb());
  f.frame_id = 3;
  expect_error(ErrorCode::BackendFailure, [&] { backend.infer(f); });
}

TEST(MockBackend, ScriptedDetectionDecodesBack) {
  const BoundingBox box{0.2, 0.3, 0.6, 0.7};
  const auto dets = decode_grid(script_single_detection(box, 1, 3));
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].class_id, 1u);
  EXPECT_GT(dets[0].confidence, 0.99);
  EXPECT_NEAR(dets[0].box.x_min, 0.2, 1e-5);
  EXPECT_NEAR(dets[0].box.y_max, 0.7, 1e-5);
}

PipelineConfig detection_config(std::chrono::microseconds latency) {
  PipelineConfig cfg;
  cfg.task = Task::Detection;
  cfg.backend.latency = latency;
  cfg.backend.script = {script_single_detection({0.1, 0.1, 0.4, 0.5}, 0, 1)};
  cfg.vocabulary = {"person"};
  return cfg;
}

class VectorSource final : public FrameSource {
 public:
  explicit VectorSource(std::size_t n) : n_(n) {}
  std::optional<SourceItem> next() override {
    if (i_ >= n_) return std::nullopt;
    Frame f = synthetic_frame(8, 6, ChannelLayout::rgb(), i_);
    f.timestamp_us = static_cast<std::int64_t>(i_) * 1000;
    ++i_;
    return SourceItem{std::move(f), {}};
  }

 private:
  std::size_t n_;
  std::uint64_t i_ = 0;
};

TEST(RunPipeline, DirectoryBlockPolicyProcessesEverything) {
  TempDir dir;
  for (int i = 0; i < 100; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "f%03d.png", i);
    save_frame(synthetic_frame(8, 6, ChannelLayout::rgb(), static_cast<std::uint64_t>(i)), dir / name);
  }
  auto cfg = detection_config(0us);
  cfg.source = {SourceSpec::Kind::Directory, dir.path()};
  cfg.drop_policy = DropPolicy::Block;
  cfg.sink = {SinkSpec::Kind::Jsonl, dir / "out.jsonl"};
  const auto t = run_pipeline(cfg);
  EXPECT_FALSE(t.aborted());
  EXPECT_EQ(t.ingested, 100u);
  EXPECT_EQ(t.processed, 100u);
  EXPECT_EQ(t.dropped, 0u);
  EXPECT_EQ(t.in_flight, 0u);

  std::ifstream in(dir / "out.jsonl");
  std::string line;
  std::int64_t prev = -1;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    EXPECT_GT(j["frame_id"].get<std::int64_t>(), prev);
    prev = j["frame_id"].get<std::int64_t>();
    EXPECT_EQ(j["task"], "detection");
    ASSERT_EQ(j["detections"].size(), 1u);
    EXPECT_EQ(j["detections"][0]["class_name"], "person");
    EXPECT_EQ(j["detections"][0]["box"].size(), 4u);
    ++n;
  }
  EXPECT_EQ(n, 100u);
}

TEST(RunPipeline, ConservationOrderingAndBoundedQueues) {
  for (std::size_t capacity : {1u, 3u}) {
    auto cfg = detection_config(3ms);
    cfg.queue_capacity = capacity;
    VectorSource src(200);
    auto backend = make_backend(cfg.backend, cfg.task);
    MemorySink sink;
    const auto t = run_pipeline(cfg, src, *backend, sink);
    EXPECT_EQ(t.ingested, 200u);
    EXPECT_EQ(t.ingested, t.processed + t.dropped + t.in_flight);
    EXPECT_EQ(t.in_flight, 0u);
    EXPECT_GT(t.dropped, 0u);  // the source is much faster than the backend
    for (const auto& q : t.queues) EXPECT_LE(q.stats.high_water, capacity) << q.name;
    const auto lines = sink.lines();
    ASSERT_EQ(lines.size(), t.processed);
    std::int64_t prev = -1;
    for (const auto& l : lines) {
      const auto id = json::parse(l)["frame_id"].get<std::int64_t>();
      EXPECT_GT(id, prev);
      prev = id;
    }
  }
}

TEST(RunPipeline, BackendBoundThroughputMatchesQueueModel) {
  auto cfg = detection_config(50ms);
  cfg.source.fps = 30;
  const auto t = run_pipeline(cfg, {std::chrono::microseconds(2'000'000), std::nullopt});
  const auto model = oracle::simulate_drop_oldest(30, 0.05, 1, 2.0);
  EXPECT_NEAR(t.fps.mean_fps, model.throughput_fps, 0.1 * model.throughput_fps);
  EXPECT_NEAR(t.drop_ratio(), model.drop_ratio, 0.12);
  EXPECT_EQ(t.ingested, t.processed + t.dropped + t.in_flight);
}

TEST(RunPipeline, BackendFailureAbortsWithPartialTelemetry) {
  auto cfg = detection_config(0us);
  cfg.drop_policy = DropPolicy::Block;
  VectorSource src(50);
  MockBackend backend(Task::Detection, 0us, cfg.backend.script);
  backend.fail_on_frame(10);
  MemorySink sink;
  const auto t = run_pipeline(cfg, src, backend, sink);
  ASSERT_TRUE(t.aborted());
  EXPECT_NE(t.abort_reason->find("BackendFailure"), std::string::npos);
  EXPECT_EQ(t.processed, 10u);
  EXPECT_EQ(sink.lines().size(), 10u);
  EXPECT_NE(t.to_json().find("\"aborted\": true"), std::string::npos);
}

TEST(RunPipeline, ActionWindows) {
  PipelineConfig cfg;
  cfg.task = Task::Action;
  cfg.drop_policy = DropPolicy::Block;
  cfg.action_window = {4, 2};
  cfg.backend.script = {ActionScores{0, 0, 3, 0, 0, 0}};
  VectorSource src(10);
  auto backend = make_backend(cfg.backend, cfg.task);
  MemorySink sink;
  const auto t = run_pipeline(cfg, src, *backend, sink);
  EXPECT_EQ(t.processed, 10u);
  std::vector<std::pair<int, int>> windows;
  for (const auto& l : sink.lines()) {
    const auto j = json::parse(l);
    if (j["action"].is_null()) continue;
    windows.emplace_back(j["action"]["window"][0].get<int>(), j["action"]["window"][1].get<int>());
    EXPECT_EQ(j["action"]["class_name"], "run");
    EXPECT_EQ(j["action"]["class_id"], 2);
  }
  EXPECT_EQ(windows, (std::vector<std::pair<int, int>>{{0, 3}, {2, 5}, {4, 7}, {6, 9}}));
}

TEST(RunPipeline, SegmentationRecordsRoundTrip) {
  PipelineConfig cfg;
  cfg.task = Task::Segmentation;
  cfg.drop_policy = DropPolicy::Block;
  std::vector<float> scores(3 * 2 * 2, 0.0f);
  scores[0 * 2 + 1] = 1.0f;  // pixel 0 -> class 1
  scores[5 * 2 + 1] = 1.0f;  // pixel 5 -> class 1
  cfg.backend.script = {SegmentationLogits{3, 2, 2, scores}};
  VectorSource src(3);
  auto backend = make_backend(cfg.backend, cfg.task);
  MemorySink sink;
  run_pipeline(cfg, src, *backend, sink);
  ASSERT_EQ(sink.lines().size(), 3u);
  const auto j = json::parse(sink.lines()[0]);
  std::vector<std::pair<std::uint8_t, std::size_t>> runs;
  for (const auto& r : j["rle"]) runs.emplace_back(r[0].get<std::uint8_t>(), r[1].get<std::size_t>());
  EXPECT_EQ(run_length_decode(runs, 3, 2, 2), PixelMap(3, 2, 2, {1, 0, 0, 0, 0, 1}));

  TempDir dir;
  FrameRecord rec;
  rec.task = Task::Segmentation;
  rec.frame_id = 4;
  rec.mask = PixelMap(3, 2, 2, {1, 0, 0, 0, 0, 1});
  const auto with_path = json::parse(serialize_record(rec, dir.path()));
  EXPECT_EQ(load_mask(with_path["mask"].get<std::string>(), 2), *rec.mask);
}

TEST(RunLengthEncoding, RoundTripProperty) {
  CounterRng rng(17);
  for (int t = 0; t < 100; ++t) {
    const std::size_t w = rng.uniform_int(1, 9), h = rng.uniform_int(1, 9), c = rng.uniform_int(1, 4);
    std::vector<std::uint8_t> labels(w * h);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, c - 1));
    const PixelMap m(w, h, c, labels);
    std::size_t total = 0;
    for (const auto& [k, n] : run_length_encode(m)) total += n;
    EXPECT_EQ(total, w * h);
    EXPECT_EQ(run_length_decode(run_length_encode(m), w, h, c), m);
  }
}

TEST(TcpSink, CleanConnectionDeliversEverything) {
  testnet::LoopbackServer server;
  std::vector<std::string> received;
  std::jthread reader([&] {
    server.accept_client();
    received = server.read_until_eof();
  });
  constexpr int kRecords = 10000;
  TcpSinkStats stats;
  {
    TcpSink sink("127.0.0.1", server.port());
    for (int i = 0; i < kRecords; ++i) {
      FrameRecord r;
      r.frame_id = static_cast<std::uint64_t>(i);
      r.detections = {{{0.1, 0.1, 0.2, 0.2}, 0, "person", 0.5}};
      sink.write_line(serialize_record(r));
    }
    stats = sink.stats();
  }
  reader.join();
  EXPECT_EQ(stats.sent, static_cast<std::uint64_t>(kRecords));
  EXPECT_EQ(stats.lost, 0u);
  ASSERT_EQ(received.size(), static_cast<std::size_t>(kRecords));
  for (int i = 0; i < kRecords; ++i) EXPECT_EQ(json::parse(received[i])["frame_id"], i);
}

TEST(TcpSink, CountsLossAcrossForcedDisconnect) {
  testnet::LoopbackServer server;
  TcpSink sink("127.0.0.1", server.port());
  server.accept_client();
  for (int i = 0; i < 20; ++i) sink.write_line("{\"n\":" + std::to_string(i) + "}");
  EXPECT_EQ(server.read_lines(20).size(), 20u);
  server.close_client();
  std::this_thread::sleep_for(30ms);

  // The peer is gone; the first reconnect is at least 100 ms away.
  for (int i = 0; i < 15; ++i) sink.write_line("{\"lost\":" + std::to_string(i) + "}");
  EXPECT_FALSE(sink.connected());
  EXPECT_EQ(sink.stats().lost, 15u);

  std::this_thread::sleep_for(TcpSink::kInitialBackoff + 100ms);
  std::vector<std::string> tail;
  std::jthread reader([&] {
    server.accept_client();
    tail = server.read_lines(5);
  });
  for (int i = 0; i < 5; ++i) sink.write_line("{\"late\":" + std::to_string(i) + "}");
  reader.join();
  const auto s = sink.stats();
  EXPECT_EQ(s.connects, 2u);
  EXPECT_EQ(s.lost, 15u);
  EXPECT_EQ(s.sent, 25u);
  EXPECT_EQ(tail.size(), 5u);
  EXPECT_EQ(s.sent + s.lost, 40u);
}

TEST(TcpSink, BackoffDoublesAndCaps) {
  // Nothing listens on this port once the server is gone.
  std::uint16_t port;
  {
    testnet::LoopbackServer probe;
    port = probe.port();
  }
  TcpSink sink("127.0.0.1", port);
  EXPECT_FALSE(sink.connected());
  EXPECT_EQ(sink.current_backoff(), TcpSink::kInitialBackoff);
  sink.write_line("x");  // before the first retry time: counted lost, no attempt
  EXPECT_EQ(sink.current_backoff(), TcpSink::kInitialBackoff);
  std::this_thread::sleep_for(110ms);
  sink.write_line("x");
  EXPECT_EQ(sink.current_backoff(), 200ms);
  EXPECT_EQ(sink.stats().lost, 2u);
}

TEST(JsonlSink, WritesOneLinePerRecord) {
  TempDir dir;
  {
    JsonlFileSink sink(dir / "a.jsonl");
    sink.write_line("{\"a\":1}");
    sink.write_line("{\"a\":2}");
  }
  EXPECT_EQ(read_text(dir / "a.jsonl"), "{\"a\":1}\n{\"a\":2}\n");
  expect_error(ErrorCode::SinkFailure, [&] { JsonlFileSink(dir / "missing" / "x.jsonl"); });
}

TEST(Config, ParsesFullDocument) {
  const auto cfg = parse_pipeline_config(R"({
    "task": "detection",
    "source": {"type": "synthetic", "fps": 30, "width": 32, "height": 24, "frames": 10},
    "backend": {"type": "mock", "latency_ms": 50,
                "script": [{"num_classes": 1, "detection": {"box": [0.1, 0.1, 0.5, 0.5], "class_id": 0}}]},
    "queue_capacity": 2, "drop_policy": "block",
    "sink": {"type": "jsonl", "path": "out.jsonl"},
    "thresholds": {"confidence": 0.3, "nms": 0.5},
    "vocabulary": ["person"]})",
                                         "/base");
  EXPECT_EQ(cfg.task, Task::Detection);
  EXPECT_EQ(cfg.source.fps, 30);
  EXPECT_EQ(cfg.source.frame_count, 10u);
  EXPECT_EQ(cfg.backend.latency, 50000us);
  EXPECT_EQ(cfg.queue_capacity, 2u);
  EXPECT_EQ(cfg.drop_policy, DropPolicy::Block);
  EXPECT_EQ(cfg.sink.path, std::filesystem::path("/base/out.jsonl"));
  EXPECT_DOUBLE_EQ(cfg.thresholds.nms_iou, 0.5);
}

TEST(Config, ErrorsNameTheField) {
  const auto message = [](const std::string& doc) {
    try {
      parse_pipeline_config(doc);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("{"), "no error");
  EXPECT_NE(message(R"({"task": "detection", "backend": {"type": "mock", "script": []}})").find("/source"), std::string::npos);
  EXPECT_NE(message(R"({"task": "detection", "source": {"type": "synthetic", "fps": 30},
      "backend": {"type": "mock", "script": [[1,2,3,4,5,6]]}})").find("/backend/script/0"), std::string::npos);
  EXPECT_NE(message(R"({"task": "action", "source": {"type": "synthetic", "fps": 30},
      "backend": {"type": "mock", "script": [[1,2,3,4,5,6]]}, "drop_policy": "sometimes"})").find("/drop_policy"), std::string::npos);
}

}  // namespace
}  // namespace aerovision
