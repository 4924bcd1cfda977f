#ifndef CASSIFUSE_IO_HPP
#define CASSIFUSE_IO_HPP

// On-disk artifacts.
//
// Cubes are a pair of files: a JSON header
//   {"rows": M, "cols": N, "bands": B, "dtype": "float32-le",
//    "ordering": "band-sequential-column-major", "provenance": {...}}
// and a raw raster of M*N*B little-endian IEEE-754 binary32 values in the
// shared linear order. Label maps and filter banks are CSV grids. Networks are
// a flat binary record. Every writer goes through a temporary file and a
// rename, so an interrupted write never clobbers an existing artifact.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cassifuse/cube.hpp"
#include "cassifuse/errors.hpp"
#include "cassifuse/evaluation.hpp"
#include "cassifuse/mlp.hpp"

namespace cassifuse {

using Json = nlohmann::json;
using Provenance = std::map<std::string, std::string>;

inline constexpr const char* kDtypeFloat32Le = "float32-le";
inline constexpr const char* kOrderingBandSequential = "band-sequential-column-major";

struct CubeHeader {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bands = 0;
  std::string dtype = kDtypeFloat32Le;
  std::string ordering = kOrderingBandSequential;
  Provenance provenance;

  std::size_t byte_count() const { return 4 * rows * cols * bands; }

  friend bool operator==(const CubeHeader&, const CubeHeader&) = default;
};

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes `bytes` to `path` via a sibling temporary and a rename.
inline void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw io_error("short write to " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw io_error("cannot move result into " + path.string());
  }
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(p[i])} << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(p[i])} << (8 * i);
  return v;
}

inline std::size_t header_dim(const Json& j, const char* key) {
  if (!j.contains(key)) throw header_error(std::string("cube header lacks '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw header_error(std::string("'") + key + "' must be an integer");
  if (v.get<std::int64_t>() <= 0) throw header_error(std::string("'") + key + "' must be positive");
  return v.get<std::size_t>();
}

// Splits CSV text into trimmed lines, dropping trailing blank lines.
inline std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  return lines;
}

inline std::vector<std::int64_t> csv_integers(const std::string& line, std::size_t line_no) {
  std::vector<std::int64_t> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view field(line.data() + start,
                           (comma == std::string::npos ? line.size() : comma) - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw parse_error("line " + std::to_string(line_no) + ": '" + std::string(field) +
                        "' is not an integer");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline Json to_json(const CubeHeader& h) {
  Json j;
  j["rows"] = h.rows;
  j["cols"] = h.cols;
  j["bands"] = h.bands;
  j["dtype"] = h.dtype;
  j["ordering"] = h.ordering;
  j["provenance"] = Json(h.provenance);
  return j;
}

inline CubeHeader parse_cube_header(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw header_error(std::string("malformed cube header: ") + e.what());
  }
  if (!j.is_object()) throw header_error("cube header must be a JSON object");
  CubeHeader h;
  h.rows = detail::header_dim(j, "rows");
  h.cols = detail::header_dim(j, "cols");
  h.bands = detail::header_dim(j, "bands");
  h.dtype = j.value("dtype", std::string());
  if (h.dtype != kDtypeFloat32Le) throw header_error("unsupported dtype '" + h.dtype + "'");
  h.ordering = j.value("ordering", std::string());
  if (h.ordering != kOrderingBandSequential) {
    throw header_error("unsupported ordering '" + h.ordering + "'");
  }
  if (j.contains("provenance")) {
    const auto& p = j.at("provenance");
    if (!p.is_object()) throw header_error("'provenance' must be an object");
    for (const auto& [k, v] : p.items()) {
      if (!v.is_string()) throw header_error("provenance value '" + k + "' must be a string");
      h.provenance[k] = v.get<std::string>();
    }
  }
  return h;
}

inline CubeHeader read_cube_header(const std::filesystem::path& header_path) {
  return parse_cube_header(detail::read_text(header_path));
}

inline void write_cube(const SpectralCube& cube, const std::filesystem::path& header_path,
                       const std::filesystem::path& data_path, const Provenance& provenance = {}) {
  CubeHeader h;
  h.rows = cube.rows();
  h.cols = cube.cols();
  h.bands = cube.bands();
  h.provenance = provenance;
  std::string raster;
  raster.reserve(h.byte_count());
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const auto f = static_cast<float>(cube.data()[i]);
    if (!std::isfinite(f)) {
      throw domain_error("cube entry " + std::to_string(i + 1) + " overflows 32-bit storage");
    }
    detail::put_u32(raster, std::bit_cast<std::uint32_t>(f));
  }
  detail::write_atomic(data_path, raster);
  detail::write_atomic(header_path, to_json(h).dump(2) + "\n");
}

struct LoadedCube {
  SpectralCube cube;
  CubeHeader header;
};

inline LoadedCube read_cube_with_header(const std::filesystem::path& header_path,
                                        const std::filesystem::path& data_path) {
  LoadedCube out;
  out.header = read_cube_header(header_path);
  const auto bytes = detail::read_bytes(data_path);
  const auto& h = out.header;
  if (bytes.size() != h.byte_count()) throw length_mismatch_error(h.byte_count(), bytes.size());
  std::vector<double> values(h.rows * h.cols * h.bands);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = std::bit_cast<float>(detail::get_u32(bytes.data() + 4 * i));
    if (!std::isfinite(f)) {
      throw non_finite_error("non-finite raster value at linear index " + std::to_string(i + 1));
    }
    values[i] = f;
  }
  out.cube = SpectralCube(h.rows, h.cols, h.bands, std::move(values));
  return out;
}

inline SpectralCube read_cube(const std::filesystem::path& header_path,
                              const std::filesystem::path& data_path) {
  return read_cube_with_header(header_path, data_path).cube;
}

// Pattern cubes share the cube format; the filter count rides in provenance.
inline void write_patterns(const PatternCube& s, const std::filesystem::path& header_path,
                           const std::filesystem::path& data_path, Provenance provenance = {}) {
  std::vector<double> v(s.indices().begin(), s.indices().end());
  provenance["content"] = "pattern";
  provenance["filter_count"] = std::to_string(s.filter_count());
  write_cube(SpectralCube(s.rows(), s.cols(), s.snapshots(), std::move(v)), header_path, data_path,
             provenance);
}

inline PatternCube read_patterns(const std::filesystem::path& header_path,
                                 const std::filesystem::path& data_path) {
  auto loaded = read_cube_with_header(header_path, data_path);
  const auto it = loaded.header.provenance.find("filter_count");
  if (it == loaded.header.provenance.end()) throw header_error("pattern header lacks filter_count");
  std::size_t filters = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), filters);
  if (ec != std::errc() || ptr != s.data() + s.size() || filters == 0) {
    throw header_error("bad filter_count '" + s + "'");
  }
  std::vector<std::uint32_t> idx(loaded.cube.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double v = loaded.cube.data()[i];
    if (v != std::floor(v) || v < 1.0 || v > static_cast<double>(filters)) {
      throw parse_error("pattern entry " + std::to_string(v) + " at linear index " +
                        std::to_string(i + 1) + " is not a filter id in 1.." + std::to_string(filters));
    }
    idx[i] = static_cast<std::uint32_t>(v);
  }
  const auto& c = loaded.cube;
  try {
    return PatternCube(c.rows(), c.cols(), c.bands(), filters, std::move(idx));
  } catch (const std::invalid_argument& e) {
    throw parse_error(std::string("invalid pattern cube: ") + e.what());
  }
}

// One CSV row per image row.
inline std::string format_labels(const LabelMap& map) {
  std::string out;
  for (std::size_t m = 0; m < map.rows(); ++m) {
    for (std::size_t n = 0; n < map.cols(); ++n) {
      if (n) out += ',';
      out += std::to_string(map(m, n));
    }
    out += '\n';
  }
  return out;
}

inline LabelMap parse_labels(const std::string& text, std::size_t class_count = 0) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("label file is empty");
  std::vector<std::vector<std::int64_t>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    rows.push_back(detail::csv_integers(lines[i], i + 1));
    if (rows.back().size() != rows.front().size()) {
      throw parse_error("ragged label grid: line " + std::to_string(i + 1) + " has " +
                        std::to_string(rows.back().size()) + " fields, line 1 has " +
                        std::to_string(rows.front().size()));
    }
  }
  const std::size_t m_rows = rows.size(), n_cols = rows.front().size();
  std::vector<std::uint32_t> labels(m_rows * n_cols);
  for (std::size_t m = 0; m < m_rows; ++m) {
    for (std::size_t n = 0; n < n_cols; ++n) {
      const auto v = rows[m][n];
      if (v < 0) {
        throw parse_error("negative label " + std::to_string(v) + " at (" + std::to_string(m + 1) +
                          "," + std::to_string(n + 1) + ")");
      }
      if (v > std::numeric_limits<std::uint32_t>::max()) throw parse_error("label out of range");
      labels[m + n * m_rows] = static_cast<std::uint32_t>(v);
    }
  }
  return LabelMap(m_rows, n_cols, std::move(labels), class_count);
}

inline void write_labels(const LabelMap& map, const std::filesystem::path& path) {
  detail::write_atomic(path, format_labels(map));
}

inline LabelMap read_labels(const std::filesystem::path& path, std::size_t class_count = 0) {
  return parse_labels(detail::read_text(path), class_count);
}

// L rows (bands) by P columns (filters) of 0/1.
inline void write_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t l = 0; l < bank.bands(); ++l) {
    for (std::size_t i = 0; i < bank.count(); ++i) {
      if (i) out += ',';
      out += bank(l, i) ? '1' : '0';
    }
    out += '\n';
  }
  detail::write_atomic(path, out);
}

inline FilterBank read_filter_bank(const std::filesystem::path& path) {
  const auto lines = detail::csv_lines(detail::read_text(path));
  if (lines.empty()) throw parse_error("filter bank file is empty");
  std::vector<std::vector<std::int64_t>> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    rows.push_back(detail::csv_integers(lines[i], i + 1));
    if (rows.back().size() != rows.front().size()) {
      throw parse_error("ragged filter bank: line " + std::to_string(i + 1));
    }
  }
  const std::size_t bands = rows.size(), count = rows.front().size();
  std::vector<std::uint8_t> r(bands * count);
  for (std::size_t l = 0; l < bands; ++l) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = rows[l][i];
      if (v != 0 && v != 1) throw parse_error("filter response must be 0 or 1");
      r[l + i * bands] = static_cast<std::uint8_t>(v);
    }
  }
  try {
    return FilterBank(bands, count, std::move(r));
  } catch (const std::invalid_argument& e) {
    throw parse_error(std::string("invalid filter bank: ") + e.what());
  }
}

// Network record: "MLPN", u32 version, u32 layer count L, (L+1) u64 sizes,
// then per layer f64 weights (row-major, outputs x inputs) and f64 biases,
// then f64 input offsets and scales. All little-endian.
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

inline std::string encode_network(const MlpNetwork& net) {
  net.validate();
  std::string buf = "MLPN";
  detail::put_u32(buf, kNetworkFormatVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(net.layers.size()));
  for (auto s : net.layer_sizes()) detail::put_u64(buf, s);
  for (const auto& l : net.layers) {
    for (double w : l.weights) detail::put_f64(buf, w);
    for (double b : l.bias) detail::put_f64(buf, b);
  }
  for (double v : net.input_offset) detail::put_f64(buf, v);
  for (double v : net.input_scale) detail::put_f64(buf, v);
  return buf;
}

inline MlpNetwork decode_network(std::string_view bytes) {
  std::size_t at = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - at < n) throw parse_error("network record truncated at byte " + std::to_string(at));
  };
  need(12);
  if (bytes.substr(0, 4) != "MLPN") throw parse_error("not a network record (bad magic)");
  const auto version = detail::get_u32(bytes.data() + 4);
  if (version != kNetworkFormatVersion) {
    throw parse_error("unsupported network record version " + std::to_string(version));
  }
  const auto layer_count = detail::get_u32(bytes.data() + 8);
  at = 12;
  if (layer_count == 0 || layer_count > 4096) throw parse_error("implausible layer count");
  need(8 * (std::size_t{layer_count} + 1));
  std::vector<std::size_t> sizes(layer_count + 1);
  for (auto& s : sizes) {
    const auto v = detail::get_u64(bytes.data() + at);
    if (v == 0 || v > (std::uint64_t{1} << 24)) throw parse_error("implausible layer size");
    s = static_cast<std::size_t>(v);
    at += 8;
  }
  auto take = [&](std::size_t n) {
    need(8 * n);
    std::vector<double> v(n);
    for (auto& x : v) {
      x = std::bit_cast<double>(detail::get_u64(bytes.data() + at));
      if (!std::isfinite(x)) throw non_finite_error("non-finite network parameter");
      at += 8;
    }
    return v;
  };
  MlpNetwork net;
  for (std::size_t i = 0; i < layer_count; ++i) {
    DenseLayer l;
    l.inputs = sizes[i];
    l.outputs = sizes[i + 1];
    l.weights = take(l.inputs * l.outputs);
    l.bias = take(l.outputs);
    net.layers.push_back(std::move(l));
  }
  net.input_offset = take(sizes.front());
  net.input_scale = take(sizes.front());
  if (at != bytes.size()) {
    throw length_mismatch_error(at, bytes.size());
  }
  net.validate();
  return net;
}

inline void write_network(const MlpNetwork& net, const std::filesystem::path& path) {
  detail::write_atomic(path, encode_network(net));
}

inline MlpNetwork read_network(const std::filesystem::path& path) {
  const auto bytes = detail::read_bytes(path);
  return decode_network(std::string_view(bytes.data(), bytes.size()));
}

// NaN per-class accuracies (classes without support) serialize as null.
inline Json to_json(const ClassificationMetrics& r) {
  Json j;
  j["overall_accuracy"] = r.overall_accuracy;
  j["average_accuracy"] = r.average_accuracy;
  j["kappa"] = r.kappa;
  j["class_count"] = r.class_count;
  j["total"] = r.total;
  Json per = Json::array();
  for (double a : r.per_class) per.push_back(std::isnan(a) ? Json(nullptr) : Json(a));
  j["per_class_accuracy"] = per;
  j["support"] = r.support;
  Json conf = Json::array();
  for (std::size_t t = 0; t < r.class_count; ++t) {
    Json row = Json::array();
    for (std::size_t p = 0; p < r.class_count; ++p) row.push_back(r.at(t, p));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  return j;
}

inline void write_json(const Json& j, const std::filesystem::path& path) {
  detail::write_atomic(path, j.dump(2) + "\n");
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(detail::read_text(path));
  } catch (const Json::exception& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

}  // namespace cassifuse

#endif  // CASSIFUSE_IO_HPP
