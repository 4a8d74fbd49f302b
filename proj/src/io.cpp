#include "rinktrack/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rinktrack/errors.hpp"

namespace rinktrack {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos
                                           ? std::string_view::npos
                                           : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

[[noreturn]] void bad_line(const std::string& source, int line,
                           const std::string& why) {
  throw FormatError(source + " line " + std::to_string(line) + ": " + why);
}

double parse_double(std::string_view f, const std::string& source, int line) {
  double v = 0.0;
  if (!f.empty() && f.front() == '+') f.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
    bad_line(source, line, "not a finite number: '" + std::string(f) + "'");
  }
  return v;
}

int parse_int(std::string_view f, const std::string& source, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size()) {
    bad_line(source, line, "not an integer: '" + std::string(f) + "'");
  }
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

// Bounds-checked little-endian reader; on underflow throws E.
template <typename E>
class Reader {
 public:
  Reader(std::string_view bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw E(what_ + ": unexpected end of data");
  }
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string tensor_name(const std::string& net, std::size_t layer, char part) {
  return net + "." + std::to_string(layer) + "." + part;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("cannot write " + path.string());
}

// --- embeddings ------------------------------------------------------------

std::string encode_embeddings(const EmbeddingTable& rows) {
  std::string out(kEmbeddingMagic, 4);
  put<std::uint32_t>(out, kEmbeddingVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rows.size()));
  put<std::uint32_t>(out, kEmbeddingDim);
  out.reserve(out.size() + rows.size() * kEmbeddingDim * sizeof(float));
  for (const auto& r : rows) {
    if (r.size() != static_cast<std::size_t>(kEmbeddingDim)) {
      throw DimensionMismatch("embedding row has " + std::to_string(r.size()) +
                              " entries, expected " +
                              std::to_string(kEmbeddingDim));
    }
    out.append(reinterpret_cast<const char*>(r.data()), r.size() * sizeof(float));
  }
  return out;
}

EmbeddingTable decode_embeddings(std::string_view bytes) {
  Reader<FormatError> rd(bytes, "embeddings.bin");
  if (rd.take(4) != std::string_view(kEmbeddingMagic, 4)) {
    throw FormatError("embeddings.bin: bad magic");
  }
  const auto version = rd.get<std::uint32_t>();
  if (version != kEmbeddingVersion) {
    throw FormatError("embeddings.bin: unsupported version " +
                      std::to_string(version));
  }
  const auto rows = rd.get<std::uint32_t>();
  const auto dim = rd.get<std::uint32_t>();
  if (dim != static_cast<std::uint32_t>(kEmbeddingDim)) {
    throw FormatError("embeddings.bin: dimension " + std::to_string(dim) +
                      ", expected " + std::to_string(kEmbeddingDim));
  }
  const std::size_t row_bytes = std::size_t{dim} * sizeof(float);
  const std::size_t have = rd.remaining() / row_bytes;
  if (rd.remaining() != std::size_t{rows} * row_bytes) {
    throw FormatError("embeddings.bin: header declares " +
                      std::to_string(rows) + " rows but data holds " +
                      std::to_string(have) + (rd.remaining() % row_bytes
                                                  ? " rows plus a partial row"
                                                  : " rows"));
  }
  EmbeddingTable out(rows, std::vector<float>(dim));
  for (auto& r : out) std::memcpy(r.data(), rd.take(row_bytes).data(), row_bytes);
  return out;
}

void write_embeddings(const fs::path& path, const EmbeddingTable& rows) {
  write_file(path, encode_embeddings(rows));
}

EmbeddingTable read_embeddings(const fs::path& path) {
  return decode_embeddings(read_file(path));
}

// --- seq.ini ---------------------------------------------------------------

std::string format_seq_ini(const SequenceInfo& info) {
  std::string s = "[Sequence]\n";
  s += "name=" + info.name + "\n";
  s += "fps=" + std::to_string(info.fps) + "\n";
  s += "img_width=" + std::to_string(info.img_width) + "\n";
  s += "img_height=" + std::to_string(info.img_height) + "\n";
  s += "rink_length=" + format_double(info.rink.length) + "\n";
  s += "rink_width=" + format_double(info.rink.width) + "\n";
  return s;
}

SequenceInfo parse_seq_ini_text(std::string_view text) {
  const std::string src = "seq.ini";
  SequenceInfo info;
  bool in_section = false, seen_section = false;
  for_each_line(text, [&](int n, std::string_view line) {
    if (line.front() == ';' || line.front() == '#') return;
    if (line.front() == '[') {
      if (line.back() != ']') bad_line(src, n, "unterminated section header");
      in_section = trim(line.substr(1, line.size() - 2)) == "Sequence";
      seen_section = seen_section || in_section;
      return;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) bad_line(src, n, "expected key=value");
    if (!in_section) return;
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    if (key == "name") {
      info.name = std::string(val);
    } else if (key == "fps") {
      info.fps = parse_int(val, src, n);
    } else if (key == "img_width") {
      info.img_width = parse_int(val, src, n);
    } else if (key == "img_height") {
      info.img_height = parse_int(val, src, n);
    } else if (key == "rink_length") {
      info.rink.length = parse_double(val, src, n);
    } else if (key == "rink_width") {
      info.rink.width = parse_double(val, src, n);
    }
  });
  if (!seen_section) throw FormatError("seq.ini: missing [Sequence] section");
  if (info.fps <= 0 || info.img_width <= 0 || info.img_height <= 0 ||
      !(info.rink.length > 0.0) || !(info.rink.width > 0.0)) {
    throw FormatError("seq.ini: sizes and fps must be positive");
  }
  return info;
}

// --- homography.csv --------------------------------------------------------

std::string format_homographies(std::span<const HomographyRow> rows) {
  std::string s;
  for (const auto& r : rows) {
    s += std::to_string(r.frame_id);
    for (double v : r.h.free_entries()) s += "," + format_double(v);
    s += "\n";
  }
  return s;
}

std::vector<HomographyRow> parse_homographies_text(std::string_view text) {
  const std::string src = "homography.csv";
  std::vector<HomographyRow> rows;
  for_each_line(text, [&](int n, std::string_view line) {
    const auto f = split(line, ',');
    if (f.size() != 9) {
      bad_line(src, n, "expected 9 fields, found " + std::to_string(f.size()));
    }
    HomographyRow r;
    r.frame_id = parse_int(f[0], src, n);
    std::array<double, 8> h{};
    for (int k = 0; k < 8; ++k) h[k] = parse_double(f[k + 1], src, n);
    try {
      r.h = HomographyMatrix::from_free_entries(h);
    } catch (const SingularHomography& e) {
      bad_line(src, n, e.what());
    }
    rows.push_back(r);
  });
  return rows;
}

// --- tracks ----------------------------------------------------------------

std::string format_tracks(const TrackOutput& t) {
  std::string s;
  for (const auto& r : t.rows) {
    s += std::to_string(r.frame_id) + "," + std::to_string(r.track_id) + "," +
         format_double(r.box.x) + "," + format_double(r.box.y) + "," +
         format_double(r.box.wd) + "," + format_double(r.box.ht) + "," +
         format_double(r.conf) + ",-1,-1,-1\n";
  }
  return s;
}

TrackOutput parse_tracks_text(std::string_view text) {
  const std::string src = "tracks";
  TrackOutput t;
  for_each_line(text, [&](int n, std::string_view line) {
    const auto f = split(line, ',');
    if (f.size() < 7 || f.size() > 10) {
      bad_line(src, n, "expected 7 to 10 fields, found " +
                           std::to_string(f.size()));
    }
    TrackRow r;
    r.frame_id = parse_int(f[0], src, n);
    r.track_id = parse_int(f[1], src, n);
    r.box = {parse_double(f[2], src, n), parse_double(f[3], src, n),
             parse_double(f[4], src, n), parse_double(f[5], src, n)};
    r.conf = parse_double(f[6], src, n);
    for (std::size_t k = 7; k < f.size(); ++k) parse_double(f[k], src, n);
    if (r.frame_id < 1) bad_line(src, n, "frame ids start at 1");
    if (r.track_id < -1) bad_line(src, n, "negative track id");
    if (!is_valid(r.box)) bad_line(src, n, "box must have positive size");
    t.rows.push_back(r);
  });
  return t;
}

void write_tracks(const fs::path& path, const TrackOutput& t) {
  write_file(path, format_tracks(t));
}

TrackOutput parse_tracks(const fs::path& path) {
  try {
    return parse_tracks_text(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.filename().string() + ": " + e.what());
  }
}

// --- sequence layout -------------------------------------------------------

void write_sequence(const fs::path& dir, const Sequence& seq,
                    const std::vector<EmbeddingTable>* raw) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (raw && raw->size() != seq.frames.size()) {
    throw DimensionMismatch("raw embedding table does not match frame count");
  }
  TrackOutput det;
  EmbeddingTable emb;
  std::vector<HomographyRow> hom;
  for (std::size_t fi = 0; fi < seq.frames.size(); ++fi) {
    const FrameData& f = seq.frames[fi];
    if (!f.homography) {
      throw MissingHomography("frame " + std::to_string(f.frame_id) +
                              " has no homography");
    }
    if (f.embeddings.size() != f.detections.size() ||
        (raw && (*raw)[fi].size() != f.detections.size())) {
      throw DimensionMismatch("frame " + std::to_string(f.frame_id) +
                              ": one embedding per detection required");
    }
    hom.push_back({f.frame_id, *f.homography});
    for (std::size_t k = 0; k < f.detections.size(); ++k) {
      const Detection& d = f.detections[k];
      det.rows.push_back({f.frame_id, d.gt_id, d.box, d.conf});
      if (raw) {
        emb.push_back((*raw)[fi][k]);
      } else {
        const auto& v = f.embeddings[k].values();
        std::vector<float> row(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) row[i] = static_cast<float>(v[i]);
        emb.push_back(std::move(row));
      }
    }
  }
  write_file(dir / "seq.ini", format_seq_ini(seq.info));
  write_file(dir / "det.csv", format_tracks(det));
  write_file(dir / "homography.csv", format_homographies(hom));
  write_embeddings(dir / "embeddings.bin", emb);
}

Sequence parse_sequence(const fs::path& dir) {
  Sequence seq;
  seq.info = parse_seq_ini_text(read_file(dir / "seq.ini"));
  const TrackOutput det = parse_tracks(dir / "det.csv");
  const EmbeddingTable emb = read_embeddings(dir / "embeddings.bin");
  if (emb.size() != det.rows.size()) {
    throw FormatError("embeddings.bin has " + std::to_string(emb.size()) +
                      " rows but det.csv has " +
                      std::to_string(det.rows.size()));
  }
  std::map<int, HomographyMatrix> hom;
  for (const auto& r : parse_homographies_text(read_file(dir / "homography.csv"))) {
    if (!hom.emplace(r.frame_id, r.h).second) {
      throw FormatError("homography.csv: duplicate frame " +
                        std::to_string(r.frame_id));
    }
  }

  std::size_t labelled = 0;
  for (const auto& r : det.rows) labelled += r.track_id >= 0;
  if (labelled != 0 && labelled != det.rows.size()) {
    throw FormatError("det.csv mixes labelled and unlabelled (-1) rows");
  }

  std::map<int, FrameData> frames;
  for (const auto& [fid, h] : hom) {
    FrameData f;
    f.frame_id = fid;
    f.homography = h;
    frames.emplace(fid, std::move(f));
  }
  int last_frame = 0;
  for (std::size_t k = 0; k < det.rows.size(); ++k) {
    const TrackRow& r = det.rows[k];
    if (r.frame_id < last_frame) {
      throw FormatError("det.csv line " + std::to_string(k + 1) +
                        ": frames must be non-decreasing");
    }
    last_frame = r.frame_id;
    const auto it = frames.find(r.frame_id);
    if (it == frames.end()) {
      throw MissingHomography("frame " + std::to_string(r.frame_id) +
                              " has detections but no homography row");
    }
    it->second.detections.push_back({r.box, r.conf, r.track_id});
    it->second.embeddings.push_back(l2_normalize(std::span<const float>(emb[k])));
  }
  for (auto& [fid, f] : frames) seq.frames.push_back(std::move(f));
  return seq;
}

// --- model weights ---------------------------------------------------------

std::string encode_model(const ModelParameters& m, const ModelMeta& meta) {
  struct Tensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
  };
  std::vector<Tensor> tensors;
  for (const auto& [name, net] : m.networks()) {
    for (std::size_t l = 0; l < net->num_layers(); ++l) {
      const auto& layer = net->layer(l);
      Tensor w{tensor_name(name, l, 'W'),
               {static_cast<std::uint32_t>(layer.W.rows()),
                static_cast<std::uint32_t>(layer.W.cols())},
               {}};
      // Row-major on disk.
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.W.cols(); ++c) w.data.push_back(layer.W(r, c));
      }
      tensors.push_back(std::move(w));
      tensors.push_back({tensor_name(name, l, 'b'),
                         {static_cast<std::uint32_t>(layer.b.size())},
                         {layer.b.data(), layer.b.data() + layer.b.size()}});
    }
  }
  tensors.push_back({"meta.steps", {1}, {double(m.config.steps)}});
  tensors.push_back({"meta.use_projection", {1}, {m.config.use_projection ? 1.0 : 0.0}});
  if (meta.epoch) tensors.push_back({"meta.epoch", {1}, {double(*meta.epoch)}});
  if (meta.val_idf1) tensors.push_back({"meta.val_idf1", {1}, {*meta.val_idf1}});

  std::string out(kModelMagic, 4);
  put<std::uint32_t>(out, kModelVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    for (double v : t.data) put<double>(out, v);
  }
  return out;
}

LoadedModel decode_model(std::string_view bytes) {
  Reader<CorruptModelFile> rd(bytes, "model file");
  if (rd.take(4) != std::string_view(kModelMagic, 4)) {
    throw CorruptModelFile("model file: bad magic");
  }
  const auto version = rd.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw CorruptModelFile("model file: unsupported version " +
                           std::to_string(version));
  }
  LoadedModel out;
  out.params = ModelParameters::zeros();

  std::map<std::string, std::pair<Eigen::MatrixXd*, Eigen::VectorXd*>> slots;
  for (auto& [name, net] : out.params.networks()) {
    for (std::size_t l = 0; l < net->num_layers(); ++l) {
      slots[tensor_name(name, l, 'W')] = {&net->layer(l).W, nullptr};
      slots[tensor_name(name, l, 'b')] = {nullptr, &net->layer(l).b};
    }
  }
  const std::set<std::string> meta_names{"meta.steps", "meta.use_projection",
                                         "meta.epoch", "meta.val_idf1"};
  std::set<std::string> seen;

  const auto count = rd.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = rd.get<std::uint32_t>();
    if (name_len == 0 || name_len > 256) {
      throw CorruptModelFile("model file: bad tensor name length");
    }
    const std::string name(rd.take(name_len));
    if (!seen.insert(name).second) {
      throw CorruptModelFile("model file: duplicate tensor " + name);
    }
    const auto rank = rd.get<std::uint32_t>();
    if (rank < 1 || rank > 2) {
      throw CorruptModelFile("model file: tensor " + name + " has rank " +
                             std::to_string(rank));
    }
    std::vector<Eigen::Index> dims;
    for (std::uint32_t k = 0; k < rank; ++k) dims.push_back(rd.get<std::uint32_t>());

    auto shape_error = [&]() {
      return CorruptModelFile("model file: tensor " + name +
                              " has an unexpected shape");
    };
    if (meta_names.count(name)) {
      if (rank != 1 || dims[0] != 1) throw shape_error();
      const double v = rd.get<double>();
      if (!std::isfinite(v)) throw CorruptModelFile("model file: bad " + name);
      if (name == "meta.steps") {
        if (v < 1 || v > 64 || v != std::floor(v)) {
          throw CorruptModelFile("model file: bad step count");
        }
        out.params.config.steps = static_cast<int>(v);
      } else if (name == "meta.use_projection") {
        out.params.config.use_projection = v != 0.0;
      } else if (name == "meta.epoch") {
        out.meta.epoch = static_cast<int>(v);
      } else {
        out.meta.val_idf1 = v;
      }
      continue;
    }
    const auto it = slots.find(name);
    if (it == slots.end()) {
      throw CorruptModelFile("model file: unknown tensor " + name);
    }
    if (auto* W = it->second.first) {
      if (rank != 2 || dims[0] != W->rows() || dims[1] != W->cols()) throw shape_error();
      for (Eigen::Index r = 0; r < W->rows(); ++r) {
        for (Eigen::Index c = 0; c < W->cols(); ++c) (*W)(r, c) = rd.get<double>();
      }
    } else {
      auto* b = it->second.second;
      if (rank != 1 || dims[0] != b->size()) throw shape_error();
      for (Eigen::Index k = 0; k < b->size(); ++k) (*b)[k] = rd.get<double>();
    }
  }
  for (const auto& [name, slot] : slots) {
    if (!seen.count(name)) throw CorruptModelFile("model file: missing tensor " + name);
  }
  if (rd.remaining() != 0) throw CorruptModelFile("model file: trailing bytes");
  return out;
}

void save_model(const fs::path& path, const ModelParameters& m,
                const ModelMeta& meta) {
  write_file(path, encode_model(m, meta));
}

LoadedModel load_model(const fs::path& path) {
  return decode_model(read_file(path));
}

// --- metrics ---------------------------------------------------------------

std::string metrics_json(const MetricsReport& r) {
  using nlohmann::ordered_json;
  auto block = [](ordered_json& j, double mota, std::int64_t fp, std::int64_t fn,
                  std::int64_t idsw, double idf1, double idp, double idr) {
    j["mota"] = mota;
    j["fp"] = fp;
    j["fn"] = fn;
    j["idsw"] = idsw;
    j["idf1"] = idf1;
    j["idp"] = idp;
    j["idr"] = idr;
  };
  ordered_json j;
  block(j, r.mota, r.fp, r.fn, r.idsw, r.idf1, r.idp, r.idr);
  j["per_sequence"] = ordered_json::array();
  for (const auto& s : r.per_sequence) {
    ordered_json e;
    e["name"] = s.name;
    block(e, s.mota, s.totals.fp, s.totals.fn, s.totals.idsw, s.ids.idf1,
          s.ids.idp, s.ids.idr);
    j["per_sequence"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace rinktrack
