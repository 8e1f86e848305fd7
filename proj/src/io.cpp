#include "airtrack/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "airtrack/rng.hpp"

namespace airtrack::io {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_real(const std::string& s, const fs::path& path, std::size_t line) {
  if (s.empty()) parse_fail(path, line, "empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) parse_fail(path, line, "bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const fs::path& path, std::size_t line) {
  if (s.empty()) parse_fail(path, line, "empty integer");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) parse_fail(path, line, "bad integer '" + s + "'");
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  return in;
}

// Reads the header line and checks its first token.
std::string read_header(std::istream& in, const fs::path& path, const std::string& magic) {
  std::string header;
  if (!std::getline(in, header) || header.rfind(magic, 0) != 0) {
    parse_fail(path, 1, "expected header '" + magic + "'");
  }
  return header;
}

std::map<std::string, std::string> header_fields(const std::string& header) {
  std::map<std::string, std::string> out;
  std::istringstream ss(header);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

}  // namespace

void write_chip(const fs::path& path, const Chip& chip) {
  if (chip.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot write an empty chip");
  auto out = open_out(path);
  out << (chip.channels() == 3 ? "P6" : "P5") << "\n" << chip.width() << " " << chip.height() << "\n255\n";
  std::string bytes;
  bytes.reserve(chip.pixels().size());
  for (double v : chip.pixels()) bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Chip read_chip(const fs::path& path) {
  auto in = open_in(path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if ((magic != "P6" && magic != "P5") || w < 1 || h < 1 || maxval != 255) {
    throw Error(ErrorCode::kParseError, path.string() + ": unsupported PPM/PGM header");
  }
  in.get();
  const int channels = magic == "P6" ? 3 : 1;
  std::string bytes(static_cast<std::size_t>(w) * h * channels, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorCode::kParseError, path.string() + ": truncated pixel data");
  }
  std::vector<double> px;
  px.reserve(bytes.size());
  for (char b : bytes) px.push_back(static_cast<unsigned char>(b) / 255.0);
  return Chip(w, h, channels, std::move(px));
}

void save_detections(const fs::path& path, std::span<const Detection> detections,
                     const deepekf::FrameGeometry& geometry, const std::string& chip_dir) {
  auto out = open_out(path);
  out << "#airtrack-detections v1 width=" << fmt_real(geometry.width)
      << " height=" << fmt_real(geometry.height) << "\n";
  out << "frame,detection_id,x,y,w,h,label,confidence,chip_path,lon,lat,azimuth,elevation,zoom\n";
  const fs::path base = path.parent_path();
  for (const Detection& d : detections) {
    if (d.label.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "labels may not contain commas or newlines");
    }
    std::string chip_path;
    if (!chip_dir.empty() && !d.chip.empty()) {
      chip_path = chip_dir + "/d" + std::to_string(d.detection_id) + (d.chip.channels() == 3 ? ".ppm" : ".pgm");
      write_chip(base / chip_path, d.chip);
    }
    out << d.frame_index << "," << d.detection_id << "," << fmt_real(d.box.x) << "," << fmt_real(d.box.y)
        << "," << fmt_real(d.box.w) << "," << fmt_real(d.box.h) << "," << d.label << ","
        << fmt_real(d.confidence) << "," << chip_path;
    if (d.platform) {
      const PlatformMeta& p = *d.platform;
      out << "," << fmt_real(p.longitude) << "," << fmt_real(p.latitude) << "," << fmt_real(p.camera_azimuth)
          << "," << fmt_real(p.camera_elevation) << "," << fmt_real(p.zoom);
    } else {
      out << ",,,,,";
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

DetectionSet load_detections(const fs::path& path) {
  auto in = open_in(path);
  DetectionSet out;
  const auto fields = header_fields(read_header(in, path, "#airtrack-detections v1"));
  if (fields.count("width")) out.geometry.width = parse_real(fields.at("width"), path, 1);
  if (fields.count("height")) out.geometry.height = parse_real(fields.at("height"), path, 1);
  const fs::path base = path.parent_path();
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("frame,", 0) == 0 || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() != 14) parse_fail(path, lineno, "expected 14 fields, got " + std::to_string(cols.size()));
    Detection d;
    d.frame_index = parse_int(cols[0], path, lineno);
    d.detection_id = parse_int(cols[1], path, lineno);
    d.box = {parse_real(cols[2], path, lineno), parse_real(cols[3], path, lineno),
             parse_real(cols[4], path, lineno), parse_real(cols[5], path, lineno)};
    d.label = cols[6];
    d.confidence = parse_real(cols[7], path, lineno);
    if (d.frame_index < 0) parse_fail(path, lineno, "negative frame index");
    if (!d.box.valid()) parse_fail(path, lineno, "box width and height must be positive");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) parse_fail(path, lineno, "confidence outside [0, 1]");
    if (!out.detections.empty() && d.frame_index < out.detections.back().frame_index) {
      parse_fail(path, lineno, "frame " + std::to_string(d.frame_index) + " out of order");
    }
    if (!cols[8].empty() && fs::exists(base / cols[8])) {
      d.chip = read_chip(base / cols[8]);
    } else {
      d.chip = Chip::filled(64, 64, 3, 0.0);
      ++out.missing_chips;
    }
    const bool any_platform = !(cols[9].empty() && cols[10].empty() && cols[11].empty() &&
                                cols[12].empty() && cols[13].empty());
    if (any_platform) {
      PlatformMeta p{parse_real(cols[9], path, lineno), parse_real(cols[10], path, lineno),
                     parse_real(cols[11], path, lineno), parse_real(cols[12], path, lineno),
                     parse_real(cols[13], path, lineno)};
      if (!p.valid()) parse_fail(path, lineno, "platform metadata out of range");
      d.platform = p;
    }
    out.detections.push_back(std::move(d));
  }
  return out;
}

void save_tracks(const fs::path& path, std::span<const eval::TrackRecord> tracks) {
  auto out = open_out(path);
  out << "#airtrack-tracks v1\n";
  out << "track_id,frame,x,y,w,h\n";
  for (const auto& t : tracks) {
    for (const auto& [f, b] : t.boxes) {
      out << t.id << "," << f << "," << fmt_real(b.x) << "," << fmt_real(b.y) << "," << fmt_real(b.w) << ","
          << fmt_real(b.h) << "\n";
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<eval::TrackRecord> load_tracks(const fs::path& path) {
  auto in = open_in(path);
  read_header(in, path, "#airtrack-tracks v1");
  std::map<std::int64_t, eval::TrackRecord> by_id;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("track_id,", 0) == 0 || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() != 6) parse_fail(path, lineno, "expected 6 fields");
    const std::int64_t id = parse_int(cols[0], path, lineno);
    const std::int64_t f = parse_int(cols[1], path, lineno);
    const BoundingBox b{parse_real(cols[2], path, lineno), parse_real(cols[3], path, lineno),
                        parse_real(cols[4], path, lineno), parse_real(cols[5], path, lineno)};
    if (!b.valid()) parse_fail(path, lineno, "box width and height must be positive");
    auto& rec = by_id[id];
    rec.id = id;
    if (!rec.boxes.emplace(f, b).second) parse_fail(path, lineno, "duplicate frame for track");
  }
  std::vector<eval::TrackRecord> out;
  for (auto& [id, rec] : by_id) out.push_back(std::move(rec));
  return out;
}

void save_assignments(const fs::path& path, std::span<const Assignment> assignments) {
  auto out = open_out(path);
  out << "#airtrack-assignments v1\n";
  out << "frame,track_id,detection_id,fused,scores\n";
  for (const Assignment& a : assignments) {
    out << a.frame_index << "," << a.track_id << ","
        << (a.detection_id ? std::to_string(*a.detection_id) : std::string("MISS")) << "," << fmt_real(a.fused)
        << ",";
    for (std::size_t i = 0; i < a.scores.size(); ++i) {
      const auto& s = a.scores[i];
      out << (i ? ";" : "") << s.comparator_name << ":" << fmt_real(s.raw) << ":" << fmt_real(s.normalized);
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<Assignment> load_assignments(const fs::path& path) {
  auto in = open_in(path);
  read_header(in, path, "#airtrack-assignments v1");
  std::vector<Assignment> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.rfind("frame,", 0) == 0 || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() != 5) parse_fail(path, lineno, "expected 5 fields");
    Assignment a;
    a.frame_index = parse_int(cols[0], path, lineno);
    a.track_id = parse_int(cols[1], path, lineno);
    if (cols[2] != "MISS") a.detection_id = parse_int(cols[2], path, lineno);
    a.fused = parse_real(cols[3], path, lineno);
    if (!cols[4].empty()) {
      for (const auto& item : split(cols[4], ';')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) parse_fail(path, lineno, "bad comparator score '" + item + "'");
        a.scores.push_back({parts[0], parse_real(parts[1], path, lineno), parse_real(parts[2], path, lineno)});
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string format_metrics(std::span<const eval::MetricsRow> rows) {
  std::string out = "#airtrack-metrics v1\nmode,eao,precision,recall,absence_accuracy\n";
  for (const auto& r : rows) {
    out += std::string(eval::to_string(r.mode)) + "," + fmt_real(r.eao) + "," + fmt_real(r.summary.precision) +
           "," + fmt_real(r.summary.recall) + "," + fmt_real(r.summary.absence_accuracy) + "\n";
  }
  return out;
}

void save_metrics(const fs::path& path, std::span<const eval::MetricsRow> rows) {
  auto out = open_out(path);
  out << format_metrics(rows);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  auto out = open_out(path);
  out << "airtrack-checkpoint 1\n";
  out << "kind " << ckpt.kind << "\n";
  for (const auto& [k, v] : ckpt.config) out << "config " << k << " " << v << "\n";
  for (const auto& [name, m] : ckpt.tensors) {
    out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << fmt_real(m(r, c));
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  auto in = open_in(path);
  Checkpoint ckpt;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) parse_fail(path, lineno + 1, "unexpected end of checkpoint");
    ++lineno;
  };
  next();
  if (line != "airtrack-checkpoint 1") parse_fail(path, lineno, "not an airtrack checkpoint (version 1)");
  bool ended = false;
  while (!ended) {
    next();
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "kind") {
      ss >> ckpt.kind;
    } else if (tag == "config") {
      std::string k, v;
      ss >> k >> v;
      ckpt.config[k] = v;
    } else if (tag == "tensor") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      if (!(ss >> name >> rows >> cols) || rows < 0 || cols < 0) parse_fail(path, lineno, "bad tensor header");
      ad::Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        next();
        const auto vals = split(line, ' ');
        if (static_cast<Eigen::Index>(vals.size()) != cols) parse_fail(path, lineno, "tensor row has wrong width");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = parse_real(vals[static_cast<std::size_t>(c)], path, lineno);
      }
      ckpt.tensors[name] = std::move(m);
    } else if (tag == "end") {
      ended = true;
    } else {
      parse_fail(path, lineno, "unknown record '" + tag + "'");
    }
  }
  return ckpt;
}

namespace {

template <typename Params>
void fill_tensors(Checkpoint& ckpt, const Params& params) {
  for (const ad::Parameter* p : params) ckpt.tensors[p->name] = p->value;
}

void restore(const Checkpoint& ckpt, std::vector<ad::Parameter*> params, const fs::path& path) {
  if (ckpt.tensors.size() != params.size()) {
    throw Error(ErrorCode::kParseError, path.string() + ": tensor count does not match the model");
  }
  for (ad::Parameter* p : params) {
    const auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw Error(ErrorCode::kParseError, path.string() + ": missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw Error(ErrorCode::kParseError, path.string() + ": tensor " + p->name + " has the wrong shape");
    }
    p->value = it->second;
    p->grad.setZero();
  }
}

const std::string& cfg_get(const Checkpoint& ckpt, const std::string& key, const fs::path& path) {
  const auto it = ckpt.config.find(key);
  if (it == ckpt.config.end()) throw Error(ErrorCode::kParseError, path.string() + ": missing config " + key);
  return it->second;
}

int cfg_int(const Checkpoint& c, const std::string& key, const fs::path& path) {
  return static_cast<int>(parse_int(cfg_get(c, key, path), path, 0));
}

}  // namespace

void save_model(const fs::path& path, const deepekf::DeepEkfModel& model) {
  const auto& c = model.config();
  Checkpoint ckpt;
  ckpt.kind = "deepekf";
  ckpt.config = {{"chip_size", std::to_string(c.chip_size)},
                 {"conv_channels", std::to_string(c.conv_channels)},
                 {"chip_embedding", std::to_string(c.chip_embedding)},
                 {"hidden", std::to_string(c.hidden)},
                 {"latent", std::to_string(c.latent)},
                 {"max_seq_len", std::to_string(c.max_seq_len)},
                 {"cell", c.cell == nn::CellType::kGru ? "gru" : "lstm"},
                 {"measurement_floor", fmt_real(c.measurement_floor)},
                 {"linear_probe", c.linear_probe ? "1" : "0"}};
  fill_tensors(ckpt, model.parameters());
  save_checkpoint(path, ckpt);
}

void save_model(const fs::path& path, const visual::SiameseModel& model) {
  const auto& c = model.config();
  Checkpoint ckpt;
  ckpt.kind = "siamese";
  ckpt.config = {{"chip_size", std::to_string(c.chip_size)},
                 {"channels1", std::to_string(c.channels1)},
                 {"channels2", std::to_string(c.channels2)},
                 {"channels3", std::to_string(c.channels3)},
                 {"neck_dim", std::to_string(c.neck_dim)},
                 {"heads", std::to_string(c.heads)},
                 {"head_dim", std::to_string(c.head_dim)},
                 {"attention_enabled", c.attention_enabled ? "1" : "0"}};
  fill_tensors(ckpt, model.parameters());
  save_checkpoint(path, ckpt);
}

deepekf::DeepEkfModel load_deepekf(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "deepekf") throw Error(ErrorCode::kParseError, path.string() + ": not a deepekf checkpoint");
  deepekf::DeepEkfConfig c;
  c.chip_size = cfg_int(ckpt, "chip_size", path);
  c.conv_channels = cfg_int(ckpt, "conv_channels", path);
  c.chip_embedding = cfg_int(ckpt, "chip_embedding", path);
  c.hidden = cfg_int(ckpt, "hidden", path);
  c.latent = cfg_int(ckpt, "latent", path);
  c.max_seq_len = cfg_int(ckpt, "max_seq_len", path);
  const std::string& cell = cfg_get(ckpt, "cell", path);
  if (cell != "gru" && cell != "lstm") throw Error(ErrorCode::kParseError, path.string() + ": unknown cell " + cell);
  c.cell = cell == "gru" ? nn::CellType::kGru : nn::CellType::kLstm;
  c.measurement_floor = parse_real(cfg_get(ckpt, "measurement_floor", path), path, 0);
  c.linear_probe = cfg_get(ckpt, "linear_probe", path) == "1";
  deepekf::DeepEkfModel model(c, 0);
  restore(ckpt, model.parameters(), path);
  return model;
}

visual::SiameseModel load_siamese(const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "siamese") throw Error(ErrorCode::kParseError, path.string() + ": not a siamese checkpoint");
  visual::SiameseConfig c;
  c.chip_size = cfg_int(ckpt, "chip_size", path);
  c.channels1 = cfg_int(ckpt, "channels1", path);
  c.channels2 = cfg_int(ckpt, "channels2", path);
  c.channels3 = cfg_int(ckpt, "channels3", path);
  c.neck_dim = cfg_int(ckpt, "neck_dim", path);
  c.heads = cfg_int(ckpt, "heads", path);
  c.head_dim = cfg_int(ckpt, "head_dim", path);
  c.attention_enabled = cfg_get(ckpt, "attention_enabled", path) == "1";
  visual::SiameseModel model(c, 0);
  restore(ckpt, model.parameters(), path);
  return model;
}

std::uint64_t file_hash(const fs::path& path) {
  auto in = open_in(path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace airtrack::io
