#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harborscan/geometry.hpp"

namespace harborscan {

// One line of a YOLO annotation file: class_id cx cy w h.
struct AnnotationRecord {
  int class_id = 0;
  BoxNorm box;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// Ordered category names; the line index in the .names file is the class id.
class ClassList {
 public:
  ClassList() = default;
  explicit ClassList(std::vector<std::string> names);

  static ClassList parse(std::string_view text);
  static ClassList load(const std::filesystem::path& file);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  const std::string& name(int class_id) const { return names_.at(static_cast<std::size_t>(class_id)); }
  const std::vector<std::string>& names() const { return names_; }
  bool contains(int class_id) const {
    return class_id >= 0 && static_cast<std::size_t>(class_id) < names_.size();
  }

 private:
  std::vector<std::string> names_;
};

enum class IssueKind {
  MalformedLine,
  ClassOutOfRange,
  CoordOutOfRange,
  DuplicateBox,
  UnreadableImage,
  UnreadableAnnotation,
  AmbiguousPairing,
};

const char* to_string(IssueKind kind);

struct ParseIssue {
  int line = 0;  // 1-based
  IssueKind kind = IssueKind::MalformedLine;
  std::string message;
};

class AnnotationError : public std::runtime_error {
 public:
  AnnotationError(IssueKind kind, int line, const std::string& message);

  IssueKind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  IssueKind kind_;
  int line_;
};

struct ParseOutcome {
  std::vector<AnnotationRecord> records;
  std::vector<ParseIssue> issues;
};

// Collects every line-level problem instead of stopping at the first.
// Lines with issues contribute no record.
ParseOutcome parse_annotation_lenient(std::string_view text, const ClassList& classes);

// Throws AnnotationError for the first offending line.
std::vector<AnnotationRecord> parse_annotation(std::string_view text, const ClassList& classes);

// Canonical form: "%d %.6f %.6f %.6f %.6f\n" per record.
std::string write_annotation(std::span<const AnnotationRecord> records);

// Six-decimal fixed formatting shared by every text/JSON writer.
std::string format_fixed6(double v);

}  // namespace harborscan
