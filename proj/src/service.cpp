#include "harborscan/service.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "harborscan/annotation.hpp"

namespace harborscan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

ordered_json record_json(const AnnotationRecord& r, const ClassList& classes) {
  ordered_json o;
  o["class_id"] = r.class_id;
  o["class_name"] = classes.contains(r.class_id) ? classes.name(r.class_id) : std::string();
  o["cx"] = round6(r.box.cx);
  o["cy"] = round6(r.box.cy);
  o["w"] = round6(r.box.w);
  o["h"] = round6(r.box.h);
  return o;
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, ordered_json{{"error", message}});
}

std::string mime_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

std::optional<std::string> read_if_exists(const fs::path& p) {
  if (!fs::is_regular_file(p)) return std::nullopt;
  return read_text_file(p);
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace

struct ReviewService::Impl {
  DatasetIndex index;
  DetectionsByImage proposals;
  ServiceOptions opts;
  httplib::Server server;
  std::unique_ptr<std::mutex[]> image_locks;
  mutable std::mutex state_mu;
  ReviewState state;
  std::thread worker;
  int port = -1;

  Impl(DatasetIndex idx, DetectionsByImage props, ServiceOptions o)
      : index(std::move(idx)),
        proposals(std::move(props)),
        opts(std::move(o)),
        image_locks(std::make_unique<std::mutex[]>(index.entries.size())) {
    const fs::path sidecar = index.root / kReviewStateFile;
    if (auto text = read_if_exists(sidecar)) state = ReviewState::from_json(*text);
    routes();
  }

  fs::path annotation_path(std::size_t i) const {
    const auto& e = index.entries.at(i);
    if (e.annotation) return *e.annotation;
    fs::path p = e.image;
    p.replace_extension(".txt");
    return p;
  }

  std::optional<std::size_t> image_index(const std::string& s) const {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v >= index.entries.size()) return std::nullopt;
    return v;
  }

  // Caller holds state_mu.
  void transition(const std::string& id, ReviewStatus to) {
    state.apply(ReviewEvent{id, to, utc_timestamp()});
    write_file_atomic(index.root / kReviewStateFile, state.to_json());
  }

  ordered_json review_json(const std::string& id) const {
    const ImageReview& r = state.get(id);
    ordered_json o;
    o["status"] = to_string(r.status);
    o["provenance"] = r.provenance ? ordered_json(to_string(*r.provenance)) : ordered_json(nullptr);
    o["updated_at"] = r.updated_at.empty() ? ordered_json(nullptr) : ordered_json(r.updated_at);
    return o;
  }

  void routes() {
    server.Get("/api/classes", [this](const httplib::Request&, httplib::Response& res) {
      ordered_json arr = ordered_json::array();
      for (std::size_t i = 0; i < index.classes.size(); ++i) {
        arr.push_back({{"id", i}, {"name", index.classes.names()[i]}});
      }
      send_json(res, 200, ordered_json{{"classes", arr}});
    });

    server.Get("/api/images", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t offset = 0;
      std::size_t limit = opts.page_size;
      std::optional<ReviewStatus> filter;
      try {
        if (req.has_param("offset")) offset = parse_size(req.get_param_value("offset"));
        if (req.has_param("limit")) limit = parse_size(req.get_param_value("limit"));
        if (req.has_param("status")) filter = parse_review_status(req.get_param_value("status"));
      } catch (const std::exception& e) {
        send_error(res, 400, e.what());
        return;
      }
      limit = std::min(limit, opts.max_page_size);
      std::lock_guard lock(state_mu);
      ordered_json items = ordered_json::array();
      std::size_t total = 0;
      for (std::size_t i = 0; i < index.entries.size(); ++i) {
        const auto& e = index.entries[i];
        if (filter && state.get(e.id).status != *filter) continue;
        if (total++ < offset || items.size() >= limit) continue;
        ordered_json o;
        o["id"] = i;
        o["name"] = e.id;
        o["width"] = e.meta ? ordered_json(e.meta->width) : ordered_json(nullptr);
        o["height"] = e.meta ? ordered_json(e.meta->height) : ordered_json(nullptr);
        o["has_annotation"] = fs::is_regular_file(annotation_path(i));
        o["has_proposals"] = proposals.count(e.id) > 0 && !proposals.at(e.id).empty();
        o["review"] = review_json(e.id);
        items.push_back(std::move(o));
      }
      send_json(res, 200, ordered_json{{"total", total}, {"offset", offset}, {"limit", limit}, {"images", items}});
    });

    server.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = image_index(req.matches[1]);
      if (!i) return send_error(res, 404, "unknown image id");
      const auto& e = index.entries[*i];
      std::string bytes;
      try {
        bytes = read_text_file(e.image);
      } catch (const std::exception& ex) {
        return send_error(res, 500, ex.what());
      }
      res.status = 200;
      res.set_content(std::move(bytes), mime_for(e.image).c_str());
    });

    server.Get(R"(/api/images/([^/]+)/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = image_index(req.matches[1]);
      if (!i) return send_error(res, 404, "unknown image id");
      const std::string text = read_if_exists(annotation_path(*i)).value_or(std::string());
      const ParseOutcome parsed = parse_annotation_lenient(text, index.classes);
      ordered_json recs = ordered_json::array();
      for (const auto& r : parsed.records) recs.push_back(record_json(r, index.classes));
      ordered_json issues = ordered_json::array();
      for (const auto& is : parsed.issues) {
        issues.push_back({{"line", is.line}, {"kind", to_string(is.kind)}, {"message", is.message}});
      }
      ordered_json body;
      body["id"] = *i;
      body["name"] = index.entries[*i].id;
      body["records"] = std::move(recs);
      body["issues"] = std::move(issues);
      body["hash"] = content_hash(text);
      {
        std::lock_guard lock(state_mu);
        body["review"] = review_json(index.entries[*i].id);
      }
      send_json(res, 200, body);
    });

    server.Get(R"(/api/images/([^/]+)/proposals)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = image_index(req.matches[1]);
      if (!i) return send_error(res, 404, "unknown image id");
      const std::string& id = index.entries[*i].id;
      ordered_json arr = ordered_json::array();
      auto it = proposals.find(id);
      if (it != proposals.end()) {
        for (const auto& d : it->second) {
          ordered_json o = record_json(AnnotationRecord{d.class_id, d.box}, index.classes);
          o["confidence"] = round6(d.confidence);
          arr.push_back(std::move(o));
        }
      }
      ordered_json review;
      {
        std::lock_guard lock(state_mu);
        if (!arr.empty() && state.get(id).status == ReviewStatus::Pending) {
          try {
            transition(id, ReviewStatus::Proposed);
          } catch (const std::exception& ex) {
            return send_error(res, 500, ex.what());
          }
        }
        review = review_json(id);
      }
      send_json(res, 200, ordered_json{{"id", *i}, {"name", id}, {"proposals", arr}, {"review", review}});
    });

    server.Put(R"(/api/images/([^/]+)/annotations)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = image_index(req.matches[1]);
      if (!i) return send_error(res, 404, "unknown image id");
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& ex) {
        return send_error(res, 400, std::string("body is not JSON: ") + ex.what());
      }

      std::vector<AnnotationRecord> records;
      std::optional<std::string> base_hash;
      try {
        if (!body.is_object()) throw std::invalid_argument("body must be an object");
        for (const auto& r : body.at("records")) {
          const json& cid = r.at("class_id");
          if (!cid.is_number_integer()) throw std::invalid_argument("class_id must be an integer");
          for (const char* k : {"cx", "cy", "w", "h"}) {
            if (!r.at(k).is_number()) throw std::invalid_argument(std::string(k) + " must be a number");
          }
          records.push_back(AnnotationRecord{cid.get<int>(), BoxNorm{r.at("cx").get<double>(), r.at("cy").get<double>(),
                                                                      r.at("w").get<double>(), r.at("h").get<double>()}});
        }
        if (body.contains("base_hash") && !body.at("base_hash").is_null()) {
          base_hash = body.at("base_hash").get<std::string>();
        }
      } catch (const std::exception& ex) {
        return send_error(res, 422, ex.what());
      }

      for (const auto& r : records) {
        if (!std::isfinite(r.box.cx) || !std::isfinite(r.box.cy) || !std::isfinite(r.box.w) || !std::isfinite(r.box.h)) {
          return send_error(res, 422, "non-finite coordinate");
        }
      }
      const std::string text = write_annotation(records);
      const ParseOutcome check = parse_annotation_lenient(text, index.classes);
      if (!check.issues.empty()) {
        ordered_json issues = ordered_json::array();
        for (const auto& is : check.issues) {
          issues.push_back({{"record", is.line - 1}, {"kind", to_string(is.kind)}, {"message", is.message}});
        }
        return send_json(res, 422, ordered_json{{"error", "invalid records"}, {"issues", issues}});
      }

      const std::string& id = index.entries[*i].id;
      const fs::path path = annotation_path(*i);
      std::lock_guard image_lock(image_locks[*i]);
      const std::string current_hash = content_hash(read_if_exists(path).value_or(std::string()));
      if (base_hash && *base_hash != current_hash) {
        return send_json(res, 409, ordered_json{{"error", "annotation changed since it was read"}, {"hash", current_hash}});
      }
      try {
        write_file_atomic(path, text);
        std::lock_guard lock(state_mu);
        transition(id, ReviewStatus::Verified);
        send_json(res, 200,
                  ordered_json{{"id", *i}, {"name", id}, {"hash", content_hash(text)}, {"review", review_json(id)}});
      } catch (const std::exception& ex) {
        send_error(res, 500, ex.what());
      }
    });

    if (opts.ui_dir) {
      if (!server.set_mount_point("/", opts.ui_dir->string())) {
        throw std::runtime_error("UI directory not found: " + opts.ui_dir->string());
      }
    }
  }
};

ReviewService::ReviewService(DatasetIndex index, DetectionsByImage proposals, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(std::move(index), std::move(proposals), std::move(opts))) {}

ReviewService::~ReviewService() { stop(); }

int ReviewService::bind(int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->opts.host);
  } else {
    impl_->port = impl_->server.bind_to_port(impl_->opts.host, port) ? port : -1;
  }
  if (impl_->port < 0) throw std::runtime_error("cannot bind " + impl_->opts.host + ":" + std::to_string(port));
  return impl_->port;
}

void ReviewService::listen() { impl_->server.listen_after_bind(); }

int ReviewService::start(int port) {
  const int p = bind(port);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return p;
}

void ReviewService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

ReviewState ReviewService::state() const {
  std::lock_guard lock(impl_->state_mu);
  return impl_->state;
}

fs::path ReviewService::annotation_path(std::size_t image) const { return impl_->annotation_path(image); }

}  // namespace harborscan
