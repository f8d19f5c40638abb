#include "harborscan/dataset.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace harborscan {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

std::uint16_t be16(const unsigned char* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::optional<ImageMeta> png_meta(std::istream& in) {
  std::array<unsigned char, 24> h{};
  if (!in.read(reinterpret_cast<char*>(h.data()), h.size())) return std::nullopt;
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (!std::equal(std::begin(kSig), std::end(kSig), h.begin())) return std::nullopt;
  if (std::string(reinterpret_cast<const char*>(h.data() + 12), 4) != "IHDR") return std::nullopt;
  const std::uint32_t w = be32(h.data() + 16);
  const std::uint32_t ht = be32(h.data() + 20);
  if (w == 0 || ht == 0 || w > 1u << 30 || ht > 1u << 30) return std::nullopt;
  return ImageMeta{static_cast<int>(w), static_cast<int>(ht)};
}

std::optional<ImageMeta> jpeg_meta(std::istream& in) {
  unsigned char soi[2];
  if (!in.read(reinterpret_cast<char*>(soi), 2) || soi[0] != 0xFF || soi[1] != 0xD8) return std::nullopt;
  for (;;) {
    int c = in.get();
    if (c == EOF) return std::nullopt;
    if (c != 0xFF) continue;
    int marker;
    do {
      marker = in.get();
    } while (marker == 0xFF);
    if (marker == EOF) return std::nullopt;
    if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;  // standalone
    if (marker == 0xD9 || marker == 0xDA) return std::nullopt;            // EOI / SOS before SOF
    unsigned char len_bytes[2];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 2)) return std::nullopt;
    const std::uint16_t len = be16(len_bytes);
    if (len < 2) return std::nullopt;
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
    if (sof) {
      unsigned char seg[5];
      if (len < 7 || !in.read(reinterpret_cast<char*>(seg), 5)) return std::nullopt;
      const int h = be16(seg + 1);
      const int w = be16(seg + 3);
      if (w == 0 || h == 0) return std::nullopt;
      return ImageMeta{w, h};
    }
    in.seekg(len - 2, std::ios::cur);
    if (!in) return std::nullopt;
  }
}

}  // namespace

const DatasetEntry* DatasetIndex::find(const std::string& id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), id,
                             [](const DatasetEntry& e, const std::string& k) { return e.id < k; });
  return (it != entries.end() && it->id == id) ? &*it : nullptr;
}

bool is_image_file(const fs::path& p) {
  const std::string ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::optional<ImageMeta> read_image_meta(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  const int first = in.peek();
  if (first == 0x89) return png_meta(in);
  if (first == 0xFF) return jpeg_meta(in);
  return std::nullopt;
}

DatasetIndex scan_dataset(const fs::path& root, const ClassList& classes) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset root is not a directory: " + root.string());
  DatasetIndex idx;
  idx.root = root;
  idx.classes = classes;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file() || !is_image_file(it->path())) continue;
    DatasetEntry e;
    e.image = it->path();
    e.id = fs::relative(it->path(), root).generic_string();
    fs::path txt = it->path();
    txt.replace_extension(".txt");
    if (fs::is_regular_file(txt)) e.annotation = txt;
    e.meta = read_image_meta(it->path());
    idx.entries.push_back(std::move(e));
  }
  std::sort(idx.entries.begin(), idx.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  return idx;
}

ValidationReport validate_dataset(const DatasetIndex& idx) {
  ValidationReport rep;
  auto add = [&rep](std::string path, std::optional<int> line, IssueKind kind, std::string msg) {
    rep.issues.push_back({std::move(path), line, kind, std::move(msg)});
    ++rep.counts[kind];
  };

  std::map<std::string, std::vector<std::string>> by_annotation;
  for (const auto& e : idx.entries) {
    if (!e.meta) add(e.id, std::nullopt, IssueKind::UnreadableImage, "cannot read image header");
    if (!e.annotation) {
      rep.unannotated.push_back(e.id);
      continue;
    }
    by_annotation[e.annotation->generic_string()].push_back(e.id);
  }

  for (const auto& [ann, images] : by_annotation) {
    const std::string ann_id = fs::relative(fs::path(ann), idx.root).generic_string();
    if (images.size() > 1) {
      std::string joined;
      for (const auto& i : images) joined += (joined.empty() ? "" : ", ") + i;
      add(ann_id, std::nullopt, IssueKind::AmbiguousPairing, "annotation shared by images: " + joined);
    }
    std::string text;
    try {
      text = read_text_file(ann);
    } catch (const std::exception& ex) {
      add(ann_id, std::nullopt, IssueKind::UnreadableAnnotation, ex.what());
      continue;
    }
    const ParseOutcome parsed = parse_annotation_lenient(text, idx.classes);
    for (const auto& issue : parsed.issues) add(ann_id, issue.line, issue.kind, issue.message);

    std::vector<AnnotationRecord> seen;
    for (const auto& r : parsed.records) {
      if (std::find(seen.begin(), seen.end(), r) != seen.end()) {
        add(ann_id, std::nullopt, IssueKind::DuplicateBox,
            "record repeated: " + write_annotation(std::span(&r, 1)).substr(0, 50));
      } else {
        seen.push_back(r);
      }
    }
  }
  return rep;
}

std::vector<LabeledImage> load_labels(const DatasetIndex& idx) {
  std::vector<LabeledImage> out;
  out.reserve(idx.entries.size());
  for (const auto& e : idx.entries) {
    LabeledImage li;
    li.id = e.id;
    li.meta = e.meta;
    if (e.annotation) {
      li.annotated = true;
      try {
        li.records = parse_annotation(read_text_file(*e.annotation), idx.classes);
      } catch (const AnnotationError& err) {
        throw AnnotationError(err.kind(), err.line(), e.annotation->string() + ": " + err.what());
      }
    }
    out.push_back(std::move(li));
  }
  return out;
}

std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, p);
}

}  // namespace harborscan
