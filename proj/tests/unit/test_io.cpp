#include <gtest/gtest.h>

#include <fstream>

#include "airtrack/io.hpp"
#include "airtrack/pipeline.hpp"
#include "airtrack/scenario.hpp"
#include "helpers.hpp"

namespace airtrack {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("airtrack_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write(const fs::path& p, const std::string& text) {
    std::ofstream out(dir_ / p);
    out << text;
  }

  fs::path dir_;
};

TEST_F(IoTest, DetectionsRoundTripExactly) {
  const auto s = scenario::generate_scenario(scenario::preset("walkers", 2));
  const deepekf::FrameGeometry g{640, 480};
  io::save_detections(dir_ / "det.csv", s.detections, g);
  const auto loaded = io::load_detections(dir_ / "det.csv");
  EXPECT_EQ(loaded.missing_chips, 0);
  EXPECT_EQ(loaded.geometry.width, 640);
  EXPECT_EQ(loaded.geometry.height, 480);
  EXPECT_EQ(loaded.detections, s.detections);
}

TEST_F(IoTest, DetectionsWithoutPlatformOrChips) {
  Rng rng(3);
  std::vector<Detection> dets;
  for (int i = 0; i < 20; ++i) {
    Detection d = testing::make_detection(i / 3, i + 1, 0, 0);
    d.box = {rng.uniform(-10, 600), rng.uniform(-10, 400), rng.uniform(1, 40), rng.uniform(1, 40)};
    d.confidence = rng.uniform();
    d.chip = Chip::filled(64, 64, 3, 0.0);
    dets.push_back(d);
  }
  io::save_detections(dir_ / "det.csv", dets, {}, "");
  const auto loaded = io::load_detections(dir_ / "det.csv");
  EXPECT_EQ(loaded.missing_chips, 20);
  EXPECT_EQ(loaded.detections, dets);
}

TEST_F(IoTest, MissingChipFileCounted) {
  std::vector<Detection> dets{testing::make_detection(0, 1, 10, 10), testing::make_detection(0, 2, 30, 10)};
  for (auto& d : dets) d.chip = Chip::filled(8, 8, 3, 51.0 / 255.0);
  io::save_detections(dir_ / "det.csv", dets, {});
  fs::remove(dir_ / "chips" / "d2.ppm");
  const auto loaded = io::load_detections(dir_ / "det.csv");
  EXPECT_EQ(loaded.missing_chips, 1);
  EXPECT_EQ(loaded.detections[0].chip, dets[0].chip);
  EXPECT_EQ(loaded.detections[1].chip.width(), 64);
}

TEST_F(IoTest, EmptyDetectionFile) {
  io::save_detections(dir_ / "det.csv", std::vector<Detection>{}, {});
  EXPECT_TRUE(io::load_detections(dir_ / "det.csv").detections.empty());
}

TEST_F(IoTest, ParseErrorsCarryLineNumbers) {
  const std::string header =
      "#airtrack-detections v1 width=640 height=480\n"
      "frame,detection_id,x,y,w,h,label,confidence,chip_path,lon,lat,azimuth,elevation,zoom\n";
  auto expect_line = [&](const std::string& body, const std::string& needle) {
    write("bad.csv", header + body);
    try {
      io::load_detections(dir_ / "bad.csv");
      FAIL() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_line("3,1,0,0,5,5,p,0.5,,,,,,\n2,2,0,0,5,5,p,0.5,,,,,,\n", "bad.csv:4:");
  expect_line("0,1,0,0,5,5,p,0.5,,,,,\n", "bad.csv:3:");
  expect_line("0,1,0,0,-5,5,p,0.5,,,,,,\n", "bad.csv:3:");
  expect_line("0,1,0,0,5,5,p,1.5,,,,,,\n", "bad.csv:3:");
  expect_line("0,1,0,zero,5,5,p,0.5,,,,,,\n", "bad.csv:3:");
  write("nohdr.csv", "0,1,0,0,5,5,p,0.5,,,,,,\n");
  EXPECT_THROW(io::load_detections(dir_ / "nohdr.csv"), Error);
  EXPECT_THROW(io::load_detections(dir_ / "absent.csv"), Error);
}

TEST_F(IoTest, TracksRoundTrip) {
  const auto s = scenario::generate_scenario(scenario::preset("runners", 3));
  io::save_tracks(dir_ / "t.csv", s.truth);
  const auto loaded = io::load_tracks(dir_ / "t.csv");
  ASSERT_EQ(loaded.size(), s.truth.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].id, s.truth[i].id);
    EXPECT_EQ(loaded[i].boxes, s.truth[i].boxes);
  }
  write("dup.csv", "#airtrack-tracks v1\ntrack_id,frame,x,y,w,h\n1,0,0,0,1,1\n1,0,0,0,1,1\n");
  EXPECT_THROW(io::load_tracks(dir_ / "dup.csv"), Error);
}

TEST_F(IoTest, AssignmentsRoundTrip) {
  std::vector<Assignment> as(3);
  as[0] = {0, 1, 5, 0.25, {{"ekf", 1.0 / 3.0, 0.7}, {"ssd", 4321.5, 0.1}}};
  as[1] = {0, 2, std::nullopt, 0.0, {}};
  as[2] = {1, 1, 9, 1.0, {{"ekf", 2e-300, 1e-17}}};
  io::save_assignments(dir_ / "a.csv", as);
  const auto loaded = io::load_assignments(dir_ / "a.csv");
  ASSERT_EQ(loaded.size(), as.size());
  for (std::size_t i = 0; i < as.size(); ++i) {
    EXPECT_EQ(loaded[i].frame_index, as[i].frame_index);
    EXPECT_EQ(loaded[i].track_id, as[i].track_id);
    EXPECT_EQ(loaded[i].detection_id, as[i].detection_id);
    EXPECT_EQ(loaded[i].fused, as[i].fused);
    ASSERT_EQ(loaded[i].scores.size(), as[i].scores.size());
    for (std::size_t k = 0; k < as[i].scores.size(); ++k) {
      EXPECT_EQ(loaded[i].scores[k].comparator_name, as[i].scores[k].comparator_name);
      EXPECT_EQ(loaded[i].scores[k].raw, as[i].scores[k].raw);
      EXPECT_EQ(loaded[i].scores[k].normalized, as[i].scores[k].normalized);
    }
  }
}

TEST_F(IoTest, ChipsRoundTripAtEightBits) {
  Rng rng(4);
  for (int c : {1, 3}) {
    Chip chip(7, 5, c);
    for (double& v : chip.pixels()) v = static_cast<double>(rng.uniform_int(0, 255)) / 255.0;
    io::write_chip(dir_ / "c.img", chip);
    EXPECT_EQ(io::read_chip(dir_ / "c.img"), chip);
  }
  write("bad.ppm", "P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(io::read_chip(dir_ / "bad.ppm"), Error);
}

TEST_F(IoTest, CheckpointRoundTrip) {
  io::Checkpoint ck;
  ck.kind = "test";
  ck.config = {{"a", "1"}, {"b", "x"}};
  Rng rng(5);
  ad::Matrix m(3, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal() * 1e-5;
  ck.tensors["w"] = m;
  ck.tensors["v"] = ad::Matrix::Constant(1, 1, -0.1);
  io::save_checkpoint(dir_ / "c.ckpt", ck);
  const auto loaded = io::load_checkpoint(dir_ / "c.ckpt");
  EXPECT_EQ(loaded.kind, "test");
  EXPECT_EQ(loaded.config, ck.config);
  ASSERT_EQ(loaded.tensors.size(), 2u);
  EXPECT_EQ(loaded.tensors.at("w"), m);
  EXPECT_EQ(loaded.tensors.at("v")(0, 0), -0.1);
  write("trunc.ckpt", "airtrack-checkpoint 1\nkind test\ntensor w 2 2\n1 2\n");
  EXPECT_THROW(io::load_checkpoint(dir_ / "trunc.ckpt"), Error);
}

TEST_F(IoTest, ModelsRoundTripBitExact) {
  deepekf::DeepEkfConfig dc;
  dc.cell = nn::CellType::kLstm;
  const deepekf::DeepEkfModel d(dc, 6);
  io::save_model(dir_ / "d.ckpt", d);
  const auto d2 = io::load_deepekf(dir_ / "d.ckpt");
  EXPECT_EQ(d2.config().cell, nn::CellType::kLstm);
  const auto p1 = d.parameters(), p2 = d2.parameters();
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i]->value, p2[i]->value) << p1[i]->name;

  visual::SiameseConfig sc;
  sc.chip_size = 16;
  sc.attention_enabled = false;
  const visual::SiameseModel s(sc, 7);
  io::save_model(dir_ / "s.ckpt", s);
  const auto s2 = io::load_siamese(dir_ / "s.ckpt");
  EXPECT_FALSE(s2.config().attention_enabled);
  const Chip chip = Chip::filled(16, 16, 3, 0.3);
  EXPECT_EQ(visual::embed(s, chip).values, visual::embed(s2, chip).values);
  EXPECT_THROW(io::load_siamese(dir_ / "d.ckpt"), Error);
}

TEST_F(IoTest, MetricsTable) {
  std::vector<eval::MetricsRow> rows(2);
  rows[0] = {eval::IdMode::kOUID, 0.5, {1.0, 0.25, 0.75}};
  rows[1] = {eval::IdMode::kAUID, 0.625, {1.0, 0.25, 0.75}};
  io::save_metrics(dir_ / "m.csv", rows);
  std::ifstream in(dir_ / "m.csv");
  std::string header, cols, r0, r1;
  std::getline(in, header);
  std::getline(in, cols);
  std::getline(in, r0);
  std::getline(in, r1);
  EXPECT_EQ(cols, "mode,eao,precision,recall,absence_accuracy");
  EXPECT_EQ(r0, "oUID,0.5,1,0.25,0.75");
  EXPECT_EQ(r1, "aUID,0.625,1,0.25,0.75");
  EXPECT_NE(io::format_metrics(rows).find("oUID"), std::string::npos);
}

TEST_F(IoTest, FileHashTracksContent) {
  write("a", "hello");
  write("b", "hello");
  write("c", "hellp");
  EXPECT_EQ(io::file_hash(dir_ / "a"), io::file_hash(dir_ / "b"));
  EXPECT_NE(io::file_hash(dir_ / "a"), io::file_hash(dir_ / "c"));
  write("e", "");
  EXPECT_EQ(io::file_hash(dir_ / "e"), 14695981039346656037ull);
}

}  // namespace
}  // namespace airtrack
