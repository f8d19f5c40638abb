#include "harborscan/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace harborscan {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && p == end;
}

bool parse_double(std::string_view s, double& out) {
  // from_chars rejects a leading '+'; accept it for hand-edited files.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out, std::chars_format::general);
  return ec == std::errc{} && p == end && std::isfinite(out);
}

}  // namespace

ClassList::ClassList(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw std::invalid_argument("class list is empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty() || trim(n).size() != n.size()) {
      throw std::invalid_argument("class name '" + n + "' is empty or has surrounding whitespace");
    }
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate class name '" + n + "'");
  }
}

ClassList ClassList::parse(std::string_view text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = trim(text.substr(pos, nl - pos));
    if (!line.empty()) names.emplace_back(line);
    pos = nl + 1;
  }
  return ClassList(std::move(names));
}

ClassList ClassList::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open class file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const char* to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::MalformedLine: return "MalformedLine";
    case IssueKind::ClassOutOfRange: return "ClassOutOfRange";
    case IssueKind::CoordOutOfRange: return "CoordOutOfRange";
    case IssueKind::DuplicateBox: return "DuplicateBox";
    case IssueKind::UnreadableImage: return "UnreadableImage";
    case IssueKind::UnreadableAnnotation: return "UnreadableAnnotation";
    case IssueKind::AmbiguousPairing: return "AmbiguousPairing";
  }
  return "Unknown";
}

AnnotationError::AnnotationError(IssueKind kind, int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + to_string(kind) + ": " + message),
      kind_(kind),
      line_(line) {}

ParseOutcome parse_annotation_lenient(std::string_view text, const ClassList& classes) {
  ParseOutcome out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 5) {
      out.issues.push_back({line_no, IssueKind::MalformedLine,
                            "expected 5 fields, got " + std::to_string(fields.size())});
      continue;
    }
    AnnotationRecord rec;
    double v[4];
    bool numeric = parse_int(fields[0], rec.class_id);
    for (int k = 0; k < 4 && numeric; ++k) numeric = parse_double(fields[k + 1], v[k]);
    if (!numeric) {
      out.issues.push_back({line_no, IssueKind::MalformedLine, "non-numeric field"});
      continue;
    }
    if (!classes.contains(rec.class_id)) {
      out.issues.push_back({line_no, IssueKind::ClassOutOfRange,
                            "class " + std::to_string(rec.class_id) + " not in [0, " +
                                std::to_string(classes.size()) + ")"});
      continue;
    }
    rec.box = BoxNorm{v[0], v[1], v[2], v[3]};
    if (!is_valid(rec.box)) {
      out.issues.push_back({line_no, IssueKind::CoordOutOfRange,
                            "box (" + std::string(fields[1]) + ", " + std::string(fields[2]) + ", " +
                                std::string(fields[3]) + ", " + std::string(fields[4]) +
                                ") outside the unit range"});
      continue;
    }
    if (std::find(out.records.begin(), out.records.end(), rec) != out.records.end()) {
      out.issues.push_back({line_no, IssueKind::DuplicateBox, "repeats an earlier record"});
      continue;
    }
    out.records.push_back(rec);
  }
  return out;
}

std::vector<AnnotationRecord> parse_annotation(std::string_view text, const ClassList& classes) {
  ParseOutcome out = parse_annotation_lenient(text, classes);
  if (!out.issues.empty()) {
    const ParseIssue& first = out.issues.front();
    throw AnnotationError(first.kind, first.line, first.message);
  }
  return std::move(out.records);
}

std::string format_fixed6(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf, static_cast<std::size_t>(n));
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string write_annotation(std::span<const AnnotationRecord> records) {
  std::string out;
  out.reserve(records.size() * 40);
  for (const auto& r : records) {
    out += std::to_string(r.class_id);
    for (double v : {r.box.cx, r.box.cy, r.box.w, r.box.h}) {
      out += ' ';
      out += format_fixed6(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace harborscan
