#include "dpslm/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace dpslm {

using nlohmann::json;

namespace {

constexpr char kFeatureMagic[4] = {'D', 'P', 'F', 'T'};
constexpr char kCodebookMagic[4] = {'D', 'P', 'C', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32le(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {
      static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
      static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

bool read_u32le(std::istream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) |
      (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) |
      (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

void write_f32le(std::ostream& out, float v) {
  write_u32le(out, std::bit_cast<std::uint32_t>(v));
}

bool read_f32le(std::istream& in, float& v) {
  std::uint32_t bits;
  if (!read_u32le(in, bits)) return false;
  v = std::bit_cast<float>(bits);
  return true;
}

void write_f32_block(std::ostream& out, const std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) write_f32le(out, v);
  }
}

bool read_f32_block(std::istream& in, std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    return static_cast<bool>(
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(float))));
  } else {
    for (float& v : values) {
      if (!read_f32le(in, v)) return false;
    }
    return true;
  }
}

std::ifstream open_for_read(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) {
    throw Error(ErrorCategory::Io, "cannot open for read: " + path.string());
  }
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) {
    throw Error(ErrorCategory::Io, "cannot open for write: " + path.string());
  }
  return out;
}

void check_magic(std::istream& in, const char (&magic)[4],
                 const std::filesystem::path& path) {
  char got[4] = {0, 0, 0, 0};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw Error(ErrorCategory::BadMagic, "bad magic in " + path.string());
  }
}

void check_version(std::istream& in, const std::filesystem::path& path) {
  std::uint32_t version = 0;
  if (!read_u32le(in, version)) {
    throw Error(ErrorCategory::Truncated, "truncated header in " + path.string());
  }
  if (version != kFormatVersion) {
    throw Error(ErrorCategory::BadVersion,
                "unsupported version " + std::to_string(version) + " in " + path.string());
  }
}

void check_no_trailing(std::istream& in, const std::filesystem::path& path) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCategory::Invariant, "trailing bytes in " + path.string());
  }
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  std::string offending;
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      if (!offending.empty()) offending += ", ";
      offending += key;
    }
  }
  if (!offending.empty()) {
    throw Error(ErrorCategory::Config, where + ": unknown keys: " + offending);
  }
}

std::vector<std::int32_t> int_array(const json& arr, const std::string& where) {
  if (!arr.is_array()) {
    throw Error(ErrorCategory::Invariant, where + ": expected an array of integers");
  }
  std::vector<std::int32_t> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCategory::Invariant, where + ": expected an array of integers");
    }
    out.push_back(v.get<std::int32_t>());
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::int64_t parse_i64(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCategory::Invariant, where + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

FeatureSequence load_features(const std::filesystem::path& path, std::string utt_id) {
  auto in = open_for_read(path, std::ios::binary);
  check_magic(in, kFeatureMagic, path);
  check_version(in, path);

  std::uint32_t t = 0, d = 0;
  float rate = 0.0f;
  if (!read_u32le(in, t) || !read_u32le(in, d) || !read_f32le(in, rate)) {
    throw Error(ErrorCategory::Truncated, "truncated header in " + path.string());
  }

  FeatureSequence seq;
  seq.utt_id = utt_id.empty() ? path.stem().string() : std::move(utt_id);
  seq.num_frames = t;
  seq.dim = d;
  seq.frame_rate_hz = rate;
  seq.data.resize(static_cast<std::size_t>(t) * d);
  if (!read_f32_block(in, seq.data)) {
    throw Error(ErrorCategory::Truncated, "truncated payload in " + path.string());
  }
  check_no_trailing(in, path);
  validate(seq);
  return seq;
}

void store_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  validate(seq);
  auto out = open_for_write(path, std::ios::binary);
  out.write(kFeatureMagic, 4);
  write_u32le(out, kFormatVersion);
  write_u32le(out, static_cast<std::uint32_t>(seq.num_frames));
  write_u32le(out, static_cast<std::uint32_t>(seq.dim));
  write_f32le(out, seq.frame_rate_hz);
  write_f32_block(out, seq.data);
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  auto in = open_for_read(path, std::ios::binary);
  check_magic(in, kCodebookMagic, path);
  check_version(in, path);

  std::uint32_t k = 0, d = 0;
  if (!read_u32le(in, k) || !read_u32le(in, d)) {
    throw Error(ErrorCategory::Truncated, "truncated header in " + path.string());
  }
  Codebook cb;
  cb.size = k;
  cb.dim = d;
  cb.centroids.resize(static_cast<std::size_t>(k) * d);
  if (!read_f32_block(in, cb.centroids)) {
    throw Error(ErrorCategory::Truncated, "truncated payload in " + path.string());
  }
  check_no_trailing(in, path);
  validate(cb);
  return cb;
}

void store_codebook(const Codebook& cb, const std::filesystem::path& path) {
  validate(cb);
  auto out = open_for_write(path, std::ios::binary);
  out.write(kCodebookMagic, 4);
  write_u32le(out, kFormatVersion);
  write_u32le(out, static_cast<std::uint32_t>(cb.size));
  write_u32le(out, static_cast<std::uint32_t>(cb.dim));
  write_f32_block(out, cb.centroids);
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

std::vector<EncodedUtterance> load_units(const std::filesystem::path& path) {
  auto in = open_for_read(path, std::ios::in);
  std::vector<EncodedUtterance> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCategory::Invariant, where + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCategory::Invariant, where + ": expected a JSON object");
    }
    reject_unknown_keys(
        obj, {"utt_id", "units", "durations", "total_frames", "frame_rate_hz", "frame_codes"},
        where);
    for (const char* key : {"utt_id", "units", "durations", "total_frames", "frame_rate_hz"}) {
      if (!obj.contains(key)) {
        throw Error(ErrorCategory::Invariant, where + ": missing key '" + key + "'");
      }
    }
    EncodedUtterance enc;
    if (!obj["utt_id"].is_string()) {
      throw Error(ErrorCategory::Invariant, where + ": utt_id must be a string");
    }
    enc.utt_id = obj["utt_id"].get<std::string>();
    enc.units = int_array(obj["units"], where + " units");
    enc.durations = int_array(obj["durations"], where + " durations");
    if (!obj["total_frames"].is_number_integer()) {
      throw Error(ErrorCategory::Invariant, where + ": total_frames must be an integer");
    }
    enc.total_frames = obj["total_frames"].get<std::int64_t>();
    if (!obj["frame_rate_hz"].is_number()) {
      throw Error(ErrorCategory::Invariant, where + ": frame_rate_hz must be a number");
    }
    enc.frame_rate_hz = obj["frame_rate_hz"].get<double>();
    if (obj.contains("frame_codes")) {
      enc.frame_codes = int_array(obj["frame_codes"], where + " frame_codes");
      enc.store_frame_codes = true;
    } else {
      enc.store_frame_codes = false;
    }
    validate(enc);
    if (enc.frame_codes.empty()) {
      enc.frame_codes = expand_units(enc.units, enc.durations);
    }
    result.push_back(std::move(enc));
  }
  return result;
}

void store_units(std::span<const EncodedUtterance> units,
                 const std::filesystem::path& path) {
  for (const auto& enc : units) validate(enc);
  auto out = open_for_write(path, std::ios::out);
  for (const auto& enc : units) {
    json obj;
    obj["utt_id"] = enc.utt_id;
    obj["units"] = enc.units;
    obj["durations"] = enc.durations;
    obj["total_frames"] = enc.total_frames;
    obj["frame_rate_hz"] = enc.frame_rate_hz;
    if (enc.store_frame_codes) {
      obj["frame_codes"] =
          enc.frame_codes.empty() ? expand_units(enc.units, enc.durations) : enc.frame_codes;
    }
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

ItemList load_items(const std::filesystem::path& path) {
  auto in = open_for_read(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCategory::Truncated, "empty item list: " + path.string());
  }
  if (line != "utt_id\tonset\toffset\tlabel\tspeaker") {
    throw Error(ErrorCategory::Invariant, "bad item list header in " + path.string());
  }
  ItemList items;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_tabs(line);
    if (fields.size() != 5) {
      throw Error(ErrorCategory::Invariant, where + ": expected 5 tab-separated fields");
    }
    Item item;
    item.utt_id = fields[0];
    item.onset = parse_i64(fields[1], where);
    item.offset = parse_i64(fields[2], where);
    item.label = fields[3];
    item.speaker = fields[4];
    validate(item);
    items.push_back(std::move(item));
  }
  return items;
}

void store_items(const ItemList& items, const std::filesystem::path& path) {
  for (const auto& item : items) validate(item);
  auto out = open_for_write(path, std::ios::out);
  out << "utt_id\tonset\toffset\tlabel\tspeaker\n";
  for (const auto& item : items) {
    out << item.utt_id << '\t' << item.onset << '\t' << item.offset << '\t'
        << item.label << '\t' << item.speaker << '\n';
  }
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  auto in = open_for_read(path, std::ios::in);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::Invariant, path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("utterances") || !doc["utterances"].is_array()) {
    throw Error(ErrorCategory::Invariant,
                path.string() + ": expected {\"utterances\": [...]}");
  }
  reject_unknown_keys(doc, {"utterances"}, path.string());
  CorpusManifest manifest;
  for (const auto& entry : doc["utterances"]) {
    if (!entry.is_object() || !entry.contains("utt_id") || !entry.contains("path")) {
      throw Error(ErrorCategory::Invariant,
                  path.string() + ": each utterance needs utt_id and path");
    }
    reject_unknown_keys(entry, {"utt_id", "path", "split"}, path.string());
    ManifestEntry e;
    e.utt_id = entry["utt_id"].get<std::string>();
    e.path = entry["path"].get<std::string>();
    if (entry.contains("split")) e.split = entry["split"].get<std::string>();
    manifest.utterances.push_back(std::move(e));
  }
  validate(manifest);
  return manifest;
}

void store_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  json doc;
  doc["utterances"] = json::array();
  for (const auto& e : manifest.utterances) {
    json entry;
    entry["utt_id"] = e.utt_id;
    entry["path"] = e.path;
    if (!e.split.empty()) entry["split"] = e.split;
    doc["utterances"].push_back(std::move(entry));
  }
  auto out = open_for_write(path, std::ios::out);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCategory::Io, "write failed: " + path.string());
}

std::vector<FeatureSequence> load_corpus(const CorpusManifest& manifest,
                                         const std::filesystem::path& base_dir) {
  validate(manifest);
  std::vector<FeatureSequence> corpus;
  corpus.reserve(manifest.utterances.size());
  for (const auto& entry : manifest.utterances) {
    std::filesystem::path p(entry.path);
    if (p.is_relative()) p = base_dir / p;
    try {
      corpus.push_back(load_features(p, entry.utt_id));
    } catch (const Error& e) {
      throw Error(e.category(), "utterance '" + entry.utt_id + "': " + e.what());
    }
  }
  return corpus;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace dpslm
