#include "s2d/io.h"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "s2d/error.h"

namespace s2d::io {
namespace {

constexpr std::uint64_t kMaxPayloadBytes = std::uint64_t{1} << 62;

class Writer {
 public:
  explicit Writer(std::string_view magic) {
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
  }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Reserve(std::size_t n) { bytes_.reserve(bytes_.size() + n); }
  Bytes Take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string_view magic,
         std::string_view what)
      : bytes_(bytes), what_(what) {
    S2D_CHECK(bytes.size() >= magic.size() &&
                  std::memcmp(bytes.data(), magic.data(), magic.size()) == 0,
              ErrorCode::kBadMagic,
              std::string(what) + ": expected magic '" + std::string(magic) + "'");
    pos_ = magic.size();
  }

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }

  // Validates that exactly `count` elements of `width` bytes remain before
  // anything is allocated for them.
  void ExpectPayload(std::uint64_t count, std::uint64_t width) {
    S2D_CHECK(width == 0 || count <= kMaxPayloadBytes / width,
              ErrorCode::kDimOverflow,
              std::string(what_) + ": header dimensions overflow");
    const std::uint64_t need = count * width;
    const std::uint64_t have = bytes_.size() - pos_;
    S2D_CHECK(have >= need, ErrorCode::kTruncatedPayload,
              std::string(what_) + ": payload has " + std::to_string(have) +
                  " bytes, header requires " + std::to_string(need));
    S2D_CHECK(have == need, ErrorCode::kParse,
              std::string(what_) + ": " + std::to_string(have - need) +
                  " trailing bytes");
  }

 private:
  void Need(std::size_t n) const {
    S2D_CHECK(bytes_.size() - pos_ >= n, ErrorCode::kTruncatedPayload,
              std::string(what_) + ": truncated header");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string_view what_;
};

std::uint64_t Mul(std::uint64_t a, std::uint64_t b, std::string_view what) {
  S2D_CHECK(a == 0 || b <= kMaxPayloadBytes / a, ErrorCode::kDimOverflow,
            std::string(what) + ": header dimensions overflow");
  return a * b;
}

std::uint32_t CheckedU32(std::size_t v, std::string_view what) {
  S2D_CHECK(v <= 0xFFFFFFFFull, ErrorCode::kDimOverflow,
            std::string(what) + ": value does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

// Splits on whitespace; skips blank lines and '#' comments.
std::vector<std::vector<std::string>> Tokenize(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens{std::istream_iterator<std::string>(fields),
                                    std::istream_iterator<std::string>()};
    if (!tokens.empty()) lines.push_back(std::move(tokens));
  }
  return lines;
}

double ParseDouble(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  S2D_CHECK(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kParse,
            "not a number: '" + std::string(s) + "'");
  return v;
}

int ParseInt(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  S2D_CHECK(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kParse,
            "not an integer: '" + std::string(s) + "'");
  return v;
}

Pose ParsePose(const std::vector<std::string>& t, std::size_t offset) {
  return Pose::FromQuaternion(
      ParseDouble(t[offset]), ParseDouble(t[offset + 1]), ParseDouble(t[offset + 2]),
      ParseDouble(t[offset + 3]),
      Vector3d(ParseDouble(t[offset + 4]), ParseDouble(t[offset + 5]),
               ParseDouble(t[offset + 6])));
}

std::string FormatPose(const Pose& pose) {
  const auto q = pose.Quaternion();
  std::string out;
  for (const double v : {q.w(), q.x(), q.y(), q.z(), pose.t.x(), pose.t.y(), pose.t.z()}) {
    if (!out.empty()) out += ' ';
    out += FormatDouble(v);
  }
  return out;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

std::string FormatDouble(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

Bytes ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  S2D_CHECK(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  S2D_CHECK(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  S2D_CHECK(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  const Bytes bytes = ReadFile(path);
  return std::string(bytes.begin(), bytes.end());
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  WriteFile(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                            text.size()));
}

Bytes EncodeFeatureGrid(const FeatureGrid& grid) {
  Writer w("FGRD");
  w.Reserve(12 + grid.data().size() * 4);
  w.U32(CheckedU32(grid.width(), "FGRD"));
  w.U32(CheckedU32(grid.height(), "FGRD"));
  w.U32(CheckedU32(grid.channels(), "FGRD"));
  for (const float v : grid.data()) w.F32(v);
  return w.Take();
}

FeatureGrid DecodeFeatureGrid(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "FGRD", "feature grid");
  const std::uint32_t width = r.U32();
  const std::uint32_t height = r.U32();
  const std::uint32_t channels = r.U32();
  S2D_CHECK(width >= 1 && height >= 1 && channels >= 1, ErrorCode::kParse,
            "feature grid has a zero dimension");
  S2D_CHECK(width <= 0x7FFFFFFF && height <= 0x7FFFFFFF && channels <= 0x7FFFFFFF,
            ErrorCode::kDimOverflow, "feature grid dimension exceeds int range");
  const std::uint64_t count = Mul(Mul(width, height, "FGRD"), channels, "FGRD");
  r.ExpectPayload(count, 4);
  std::vector<float> data(count);
  for (auto& v : data) v = r.F32();
  return FeatureGrid(static_cast<int>(width), static_cast<int>(height),
                     static_cast<int>(channels), std::move(data));
}

Bytes EncodeGlobalDescriptor(std::span<const float> values) {
  Writer w("GDSC");
  w.U32(CheckedU32(values.size(), "GDSC"));
  for (const float v : values) w.F32(v);
  return w.Take();
}

std::vector<float> DecodeGlobalDescriptor(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "GDSC", "global descriptor");
  const std::uint32_t dim = r.U32();
  S2D_CHECK(dim >= 1, ErrorCode::kParse, "global descriptor has zero dimension");
  r.ExpectPayload(dim, 4);
  std::vector<float> values(dim);
  for (auto& v : values) v = r.F32();
  return values;
}

Bytes EncodeSparseDescriptors(std::span<const SparseDescriptor> descriptors) {
  const std::size_t dim = descriptors.empty() ? 0 : descriptors.front().values.size();
  Writer w("SDSC");
  w.U32(CheckedU32(descriptors.size(), "SDSC"));
  w.U32(CheckedU32(dim, "SDSC"));
  for (const auto& d : descriptors) {
    S2D_CHECK(d.values.size() == dim, ErrorCode::kDimensionMismatch,
              "sparse descriptors have inconsistent dimensions");
    for (const float v : d.values) w.F32(v);
  }
  return w.Take();
}

std::vector<SparseDescriptor> DecodeSparseDescriptors(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "SDSC", "sparse descriptors");
  const std::uint32_t count = r.U32();
  const std::uint32_t dim = r.U32();
  r.ExpectPayload(Mul(count, dim, "SDSC"), 4);
  std::vector<SparseDescriptor> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out[i].keypoint_index = static_cast<int>(i);
    out[i].values.resize(dim);
    for (auto& v : out[i].values) v = r.F32();
  }
  return out;
}

Bytes EncodeKeypointsLandmarks(std::span<const KeypointLandmark> records) {
  Writer w("KPLM");
  w.U32(CheckedU32(records.size(), "KPLM"));
  for (const auto& rec : records) {
    w.F32(static_cast<float>(rec.keypoint.x));
    w.F32(static_cast<float>(rec.keypoint.y));
    for (int i = 0; i < 3; ++i) w.F32(static_cast<float>(rec.landmark[i]));
  }
  return w.Take();
}

std::vector<KeypointLandmark> DecodeKeypointsLandmarks(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "KPLM", "keypoints/landmarks");
  const std::uint32_t count = r.U32();
  r.ExpectPayload(count, 20);
  std::vector<KeypointLandmark> out(count);
  for (auto& rec : out) {
    rec.keypoint.x = r.F32();
    rec.keypoint.y = r.F32();
    for (int i = 0; i < 3; ++i) rec.landmark[i] = r.F32();
  }
  return out;
}

Bytes EncodePcaModel(const PcaModel& model) {
  Writer w("PCAM");
  w.U32(CheckedU32(model.input_dim(), "PCAM"));
  w.U32(CheckedU32(model.output_dim(), "PCAM"));
  w.U32(model.whiten ? 1 : 0);
  w.F64(model.whiten_epsilon);
  w.F64(model.total_variance);
  for (Eigen::Index i = 0; i < model.mean.size(); ++i) w.F64(model.mean[i]);
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) w.F64(model.eigenvalues[i]);
  for (Eigen::Index r = 0; r < model.basis.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.basis.cols(); ++c) w.F64(model.basis(r, c));
  }
  return w.Take();
}

PcaModel DecodePcaModel(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "PCAM", "PCA model");
  const std::uint32_t in_dim = r.U32();
  const std::uint32_t out_dim = r.U32();
  const std::uint32_t whiten = r.U32();
  S2D_CHECK(in_dim >= 1 && out_dim >= 1 && out_dim <= in_dim, ErrorCode::kParse,
            "PCA model has invalid dimensions");
  PcaModel model;
  model.whiten = whiten != 0;
  model.whiten_epsilon = r.F64();
  model.total_variance = r.F64();
  r.ExpectPayload(in_dim + out_dim + Mul(in_dim, out_dim, "PCAM"), 8);
  model.mean.resize(in_dim);
  for (std::uint32_t i = 0; i < in_dim; ++i) model.mean[i] = r.F64();
  model.eigenvalues.resize(out_dim);
  for (std::uint32_t i = 0; i < out_dim; ++i) model.eigenvalues[i] = r.F64();
  model.basis.resize(out_dim, in_dim);
  for (std::uint32_t i = 0; i < out_dim; ++i) {
    for (std::uint32_t j = 0; j < in_dim; ++j) model.basis(i, j) = r.F64();
  }
  return model;
}

std::string FormatPoseLine(const std::string& id, const Pose& pose) {
  return id + " " + FormatPose(pose) + "\n";
}

std::vector<std::pair<std::string, Pose>> ParsePoseFile(std::string_view text) {
  std::vector<std::pair<std::string, Pose>> poses;
  for (const auto& t : Tokenize(text)) {
    S2D_CHECK(t.size() == 8, ErrorCode::kParse,
              "pose line needs 8 fields, got " + std::to_string(t.size()));
    poses.emplace_back(t[0], ParsePose(t, 1));
  }
  return poses;
}

std::string FormatManifest(std::span<const ManifestEntry> entries) {
  std::string out =
      "# id global sparse kplm fx fy cx cy width height qw qx qy qz tx ty tz\n";
  for (const auto& e : entries) {
    out += e.id + " " + e.global_path + " " + e.sparse_path + " " + e.kplm_path;
    for (const double v : {e.intrinsics.fx, e.intrinsics.fy, e.intrinsics.cx,
                           e.intrinsics.cy}) {
      out += " " + FormatDouble(v);
    }
    out += " " + std::to_string(e.image.width) + " " + std::to_string(e.image.height);
    out += " " + FormatPose(e.pose) + "\n";
  }
  return out;
}

std::vector<ManifestEntry> ParseManifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  for (const auto& t : Tokenize(text)) {
    S2D_CHECK(t.size() == 17, ErrorCode::kParse,
              "manifest line needs 17 fields, got " + std::to_string(t.size()));
    ManifestEntry e;
    e.id = t[0];
    e.global_path = t[1];
    e.sparse_path = t[2];
    e.kplm_path = t[3];
    e.intrinsics = {ParseDouble(t[4]), ParseDouble(t[5]), ParseDouble(t[6]),
                    ParseDouble(t[7])};
    e.image = {ParseInt(t[8]), ParseInt(t[9])};
    e.pose = ParsePose(t, 10);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string FormatQueryList(std::span<const QueryListEntry> entries) {
  std::string out = "# id dense global fx fy cx cy width height\n";
  for (const auto& e : entries) {
    out += e.id + " " + e.dense_path + " " + e.global_path;
    for (const double v : {e.intrinsics.fx, e.intrinsics.fy, e.intrinsics.cx,
                           e.intrinsics.cy}) {
      out += " " + FormatDouble(v);
    }
    out += " " + std::to_string(e.image.width) + " " +
           std::to_string(e.image.height) + "\n";
  }
  return out;
}

std::vector<QueryListEntry> ParseQueryList(std::string_view text) {
  std::vector<QueryListEntry> entries;
  for (const auto& t : Tokenize(text)) {
    S2D_CHECK(t.size() == 9, ErrorCode::kParse,
              "query line needs 9 fields, got " + std::to_string(t.size()));
    QueryListEntry e;
    e.id = t[0];
    e.dense_path = t[1];
    e.global_path = t[2];
    e.intrinsics = {ParseDouble(t[3]), ParseDouble(t[4]), ParseDouble(t[5]),
                    ParseDouble(t[6])};
    e.image = {ParseInt(t[7]), ParseInt(t[8])};
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ReferenceEntry> LoadReferences(std::span<const ManifestEntry> entries,
                                           const std::filesystem::path& base_dir) {
  std::vector<ReferenceEntry> refs;
  refs.reserve(entries.size());
  for (const auto& e : entries) {
    ReferenceEntry ref;
    ref.id = e.id;
    ref.global = MakeGlobalDescriptor(
        DecodeGlobalDescriptor(ReadFile(base_dir / e.global_path)));
    ref.intrinsics = e.intrinsics;
    ref.pose = e.pose;
    ref.image = e.image;
    ref.descriptors = DecodeSparseDescriptors(ReadFile(base_dir / e.sparse_path));
    for (const auto& rec : DecodeKeypointsLandmarks(ReadFile(base_dir / e.kplm_path))) {
      ref.keypoints.push_back(rec.keypoint);
      ref.landmarks.push_back(rec.landmark);
    }
    ref.Validate();
    refs.push_back(std::move(ref));
  }
  return refs;
}

QueryInput LoadQuery(const QueryListEntry& entry,
                     const std::filesystem::path& base_dir) {
  QueryInput q;
  q.id = entry.id;
  q.intrinsics = entry.intrinsics;
  q.image = entry.image;
  q.dense = DecodeFeatureGrid(ReadFile(base_dir / entry.dense_path));
  q.global = MakeGlobalDescriptor(
      DecodeGlobalDescriptor(ReadFile(base_dir / entry.global_path)));
  return q;
}

std::string FormatResultsCsv(std::span<const LocalizationResult> results) {
  std::string out =
      "query_id,localized,qw,qx,qy,qz,tx,ty,tz,inliers,best_ref,neighbors_tried\n";
  for (const auto& r : results) {
    out += r.query_id + "," + (r.pose ? "1" : "0");
    if (r.pose) {
      const auto q = r.pose->Quaternion();
      for (const double v : {q.w(), q.x(), q.y(), q.z(), r.pose->t.x(),
                             r.pose->t.y(), r.pose->t.z()}) {
        out += "," + FormatDouble(v);
      }
    } else {
      out += ",,,,,,,";
    }
    out += "," + std::to_string(r.inlier_count) + "," +
           r.best_reference_id.value_or("") + "," +
           std::to_string(r.neighbors_tried) + "\n";
  }
  return out;
}

std::vector<LocalizationResult> ParseResultsCsv(std::string_view text) {
  std::vector<LocalizationResult> results;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      S2D_CHECK(line.rfind("query_id,", 0) == 0, ErrorCode::kParse,
                "results CSV is missing its header");
      continue;
    }
    const auto f = SplitCsv(line);
    S2D_CHECK(f.size() == 12, ErrorCode::kParse,
              "results row needs 12 fields, got " + std::to_string(f.size()));
    LocalizationResult r;
    r.query_id = f[0];
    if (f[1] == "1") {
      r.pose = Pose::FromQuaternion(
          ParseDouble(f[2]), ParseDouble(f[3]), ParseDouble(f[4]), ParseDouble(f[5]),
          Vector3d(ParseDouble(f[6]), ParseDouble(f[7]), ParseDouble(f[8])));
    } else {
      S2D_CHECK(f[1] == "0", ErrorCode::kParse, "localized must be 0 or 1");
    }
    r.inlier_count = ParseInt(f[9]);
    if (!f[10].empty()) r.best_reference_id = f[10];
    r.neighbors_tried = ParseInt(f[11]);
    results.push_back(std::move(r));
  }
  return results;
}

std::string FormatRecallTable(const RecallReport& report) {
  std::string header = "threshold  ";
  std::string values = "recall (%) ";
  for (const auto& row : report.rows) {
    char label[64];
    std::snprintf(label, sizeof(label), "%gm/%gdeg", row.threshold.meters,
                  row.threshold.degrees);
    char value[64];
    std::snprintf(value, sizeof(value), "%.1f", row.recall_percent);
    const std::size_t width = std::max<std::size_t>(std::strlen(label), 6) + 2;
    char cell[96];
    std::snprintf(cell, sizeof(cell), "%*s", static_cast<int>(width), label);
    header += cell;
    std::snprintf(cell, sizeof(cell), "%*s", static_cast<int>(width), value);
    values += cell;
  }
  return header + "\n" + values + "\nlocalized  " + std::to_string(report.localized) +
         "/" + std::to_string(report.total) + "\n";
}

std::string FormatRecallJson(const RecallReport& report) {
  nlohmann::json doc;
  doc["total"] = report.total;
  doc["localized"] = report.localized;
  doc["thresholds"] = nlohmann::json::array();
  for (const auto& row : report.rows) {
    doc["thresholds"].push_back({{"meters", row.threshold.meters},
                                 {"degrees", row.threshold.degrees},
                                 {"count", row.count},
                                 {"recall_percent", row.recall_percent}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace s2d::io
