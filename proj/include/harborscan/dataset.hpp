#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harborscan/annotation.hpp"
#include "harborscan/geometry.hpp"

namespace harborscan {

struct DatasetEntry {
  std::string id;                                 // path relative to the root, '/'-separated
  std::filesystem::path image;                    // full image path
  std::optional<std::filesystem::path> annotation;  // same-stem .txt, when present
  std::optional<ImageMeta> meta;                  // from the image header; nullopt if unreadable
};

struct DatasetIndex {
  std::filesystem::path root;
  ClassList classes;
  std::vector<DatasetEntry> entries;  // sorted by id

  const DatasetEntry* find(const std::string& id) const;
};

// An image with its parsed records. Unannotated images carry no records
// and annotated == false.
struct LabeledImage {
  std::string id;
  std::optional<ImageMeta> meta;
  bool annotated = false;
  std::vector<AnnotationRecord> records;
};

struct ValidationIssue {
  std::string path;
  std::optional<int> line;
  IssueKind kind = IssueKind::MalformedLine;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::map<IssueKind, std::size_t> counts;
  // Images without a .txt file. Informational only; they do not make the
  // report non-empty.
  std::vector<std::string> unannotated;

  bool empty() const { return issues.empty(); }
};

bool is_image_file(const std::filesystem::path& p);

// Reads width/height from a PNG IHDR or JPEG SOF marker without decoding.
std::optional<ImageMeta> read_image_meta(const std::filesystem::path& p);

// Recursively pairs every .png/.jpg/.jpeg with its same-stem .txt.
// Throws std::filesystem::filesystem_error / std::runtime_error on I/O failure.
DatasetIndex scan_dataset(const std::filesystem::path& root, const ClassList& classes);

ValidationReport validate_dataset(const DatasetIndex& idx);

// Parses every annotation file. Throws AnnotationError (with the file path in
// the message) on the first malformed file.
std::vector<LabeledImage> load_labels(const DatasetIndex& idx);

std::string read_text_file(const std::filesystem::path& p);

// Write to a sibling temp file, then rename over the target.
void write_file_atomic(const std::filesystem::path& p, const std::string& content);

}  // namespace harborscan
