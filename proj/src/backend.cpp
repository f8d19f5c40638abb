#include "harborscan/backend.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "harborscan/annotation.hpp"
#include "harborscan/dataset.hpp"

namespace harborscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'H', 'E', 'A', 'D', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(in[pos + i])} << (8 * i);
  return v;
}

}  // namespace

std::string format_detections(const DetectionsByImage& dets) {
  std::string out;
  for (const auto& [image, list] : dets) {
    const std::string key = json(image).dump();
    for (const auto& d : list) {
      out += "{\"image\":" + key + ",\"class_id\":" + std::to_string(d.class_id) +
             ",\"confidence\":" + format_fixed6(d.confidence) + ",\"cx\":" + format_fixed6(d.box.cx) +
             ",\"cy\":" + format_fixed6(d.box.cy) + ",\"w\":" + format_fixed6(d.box.w) +
             ",\"h\":" + format_fixed6(d.box.h) + "}\n";
    }
  }
  return out;
}

DetectionsByImage parse_detections(const std::string& text) {
  DetectionsByImage out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Detection d;
      d.class_id = j.at("class_id").get<int>();
      d.confidence = j.at("confidence").get<double>();
      d.box = BoxNorm{j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
                      j.at("h").get<double>()};
      if (d.class_id < 0 || !(d.confidence >= 0.0 && d.confidence <= 1.0) || !is_valid(d.box)) {
        throw std::invalid_argument("value out of range");
      }
      out[j.at("image").get<std::string>()].push_back(d);
    } catch (const std::exception& e) {
      throw std::runtime_error("detections line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

DetectionsByImage load_detections(const fs::path& p) {
  std::string text;
  try {
    text = read_text_file(p);
  } catch (const std::exception& e) {
    throw BackendUnavailable(e.what());
  }
  return parse_detections(text);
}

ReplayBackend ReplayBackend::from_file(const fs::path& p) { return ReplayBackend(load_detections(p)); }

std::vector<Detection> ReplayBackend::detect(const std::string& image_id) {
  auto it = dets_.find(image_id);
  return it == dets_.end() ? std::vector<Detection>{} : it->second;
}

std::string encode_head_dump(const RawHeadOutput& raw, const HeadConfig& cfg) {
  if (raw.scales.size() != cfg.strides.size()) throw ShapeMismatch("scale count does not match head config");
  json header;
  header["classes"] = cfg.num_classes;
  header["boxes"] = cfg.boxes_per_cell;
  header["input_size"] = cfg.input_size;
  header["scales"] = json::array();
  for (std::size_t s = 0; s < raw.scales.size(); ++s) {
    header["scales"].push_back({{"stride", cfg.strides[s]}, {"grid", raw.scales[s].grid}});
  }
  const std::string h = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (const auto& t : raw.scales) {
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

RawHeadOutput decode_head_dump(const std::string& bytes, HeadConfig* cfg_out) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ShapeMismatch("not a head dump (bad magic)");
  }
  const std::uint32_t hlen = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw ShapeMismatch("truncated head dump header");
  HeadConfig cfg;
  json header;
  try {
    header = json::parse(bytes.substr(12, hlen));
    cfg.num_classes = header.at("classes").get<int>();
    cfg.boxes_per_cell = header.at("boxes").get<int>();
    cfg.input_size = header.value("input_size", 416);
    cfg.strides.clear();
    for (const auto& s : header.at("scales")) cfg.strides.push_back(s.at("stride").get<int>());
  } catch (const json::exception& e) {
    throw ShapeMismatch(std::string("bad head dump header: ") + e.what());
  }
  cfg.validate();

  RawHeadOutput raw;
  std::size_t pos = 12 + hlen;
  for (const auto& s : header.at("scales")) {
    const int grid = s.at("grid").get<int>();
    if (grid <= 0 || grid > 4096) throw ShapeMismatch("bad grid size in head dump");
    HeadTensor t(grid, cfg.boxes_per_cell, cfg.attrs());
    if (bytes.size() < pos + t.values.size() * 4) throw ShapeMismatch("truncated head dump payload");
    for (auto& v : t.values) {
      v = std::bit_cast<float>(get_u32(bytes, pos));
      pos += 4;
    }
    raw.scales.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw ShapeMismatch("trailing bytes in head dump");
  if (cfg_out) *cfg_out = cfg;
  return raw;
}

TensorBackend::TensorBackend(fs::path dir, AnchorSet anchors, HeadConfig cfg, DecodeParams params)
    : dir_(std::move(dir)), anchors_(std::move(anchors)), cfg_(std::move(cfg)), params_(params) {
  if (!fs::is_directory(dir_)) throw BackendUnavailable("tensor directory not found: " + dir_.string());
  cfg_.validate();
  params_.validate();
}

fs::path TensorBackend::dump_path(const std::string& image_id) const {
  fs::path rel(image_id);
  rel.replace_extension(".head");
  return dir_ / rel;
}

std::vector<Detection> TensorBackend::detect(const std::string& image_id) {
  const fs::path p = dump_path(image_id);
  if (!fs::is_regular_file(p)) throw MissingEntry("no head dump for " + image_id + " at " + p.string());
  HeadConfig file_cfg;
  const RawHeadOutput raw = decode_head_dump(read_text_file(p), &file_cfg);
  if (file_cfg.num_classes != cfg_.num_classes || file_cfg.boxes_per_cell != cfg_.boxes_per_cell ||
      file_cfg.strides != cfg_.strides || file_cfg.input_size != cfg_.input_size) {
    throw ShapeMismatch("head dump for " + image_id + " does not match the configured head");
  }
  return decode_head(raw, anchors_, cfg_, params_);
}

}  // namespace harborscan
