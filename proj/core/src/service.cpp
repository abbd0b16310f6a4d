#include "unipool/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "json.hpp"
#include "unipool/json_codec.hpp"
#include "unipool/wire.hpp"

namespace unipool {

using nlohmann::json;

std::string make_query_response(const std::string& canonical_payload) {
  // payload is spliced in verbatim as the final member so the wire bytes of
  // the payload section are exactly the canonical serialization
  std::string out = "{\"ok\":true,\"payload_bytes\":";
  out += std::to_string(canonical_payload.size());
  out += ",\"payload\":";
  out += canonical_payload;
  out += "}";
  return out;
}

std::string extract_query_payload(const std::string& response_body) {
  const json j = json::parse(response_body);
  const std::size_t n = j.at("payload_bytes").get<std::size_t>();
  if (response_body.size() < n + 1) {
    throw std::runtime_error("response too short for declared payload");
  }
  // the payload is the final member, immediately before the closing brace
  return response_body.substr(response_body.size() - 1 - n, n);
}

Server::Server(Options opts) : opts_(std::move(opts)) {
  opts_.config.validate();
  PoolStore::Options so;
  so.dir = opts_.store_dir;
  so.in_memory = opts_.store_in_memory;
  so.fsync_writes = opts_.config.fsync_writes;
  so.hf_retention_s = opts_.config.hf_retention_s;
  so.sf_retention_s = opts_.config.sf_retention_s;
  store_ = std::make_unique<PoolStore>(so);
  classifier_ = std::make_unique<ClassifierState>(opts_.config.thresholds);
  pipeline_ = std::make_unique<IngestPipeline>(*store_, *classifier_, opts_.config);
  engine_ = std::make_unique<QueryEngine>(*store_, opts_.config.retrieval);
}

Server::~Server() { stop(); }

void Server::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("server socket failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(opts_.port));
  if (::inet_pton(AF_INET, opts_.bind_address.c_str(), &addr.sin_addr) != 1) {
    throw std::runtime_error("bad bind address: " + opts_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw std::runtime_error(std::string("bind failed: ") + std::strerror(errno));
  }
  if (::listen(listen_fd_, 64) != 0) {
    throw std::runtime_error("listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) {
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> conns;
  {
    std::lock_guard lock(conn_mu_);
    conns.swap(conn_threads_);
  }
  for (auto& t : conns) {
    if (t.joinable()) t.join();
  }
}

void Server::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      if (errno == EINTR) continue;
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(conn_mu_);
    conn_threads_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void Server::handle_connection(int fd) {
  while (running_) {
    std::optional<std::string> body;
    try {
      body = read_frame(fd);
    } catch (const std::length_error&) {
      break;  // oversize frame: protocol corruption, drop the connection
    } catch (const std::exception&) {
      break;  // mid-frame disconnect
    }
    if (!body) break;  // orderly EOF
    std::string response = handle_body(*body);
    try {
      write_frame(fd, response);
    } catch (const std::exception&) {
      break;
    }
  }
  ::close(fd);
}

std::string Server::handle_body(const std::string& body) {
  json req = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (req.is_discarded() || !req.is_object()) {
    return json{{"error", "bad_frame"}, {"detail", "body is not a JSON object"}}
        .dump();
  }
  if (!req.contains("op") || !req["op"].is_string()) {
    return json{{"error", "bad_request"}, {"detail", "missing op"}}.dump();
  }
  const std::string op = req["op"].get<std::string>();
  const json payload = req.value("payload", json::object());
  try {
    if (op == "ingest") {
      std::vector<RawRecord> records;
      for (const auto& jr : payload.at("records")) {
        records.push_back(raw_record_from_json(jr.dump()));
      }
      PipelineResult result = pipeline_->ingest(std::move(records));
      json receipts = json::array();
      for (const auto& r : result.receipts) {
        receipts.push_back(json{{"entry_id", r.entry_id},
                                {"partition", to_string(r.partition)},
                                {"ok", r.ok},
                                {"error", r.error}});
      }
      json errors = json::array();
      for (const auto& e : result.errors) {
        errors.push_back(json{{"source_id", e.source_id},
                              {"timestamp_us", e.timestamp_us},
                              {"message", e.message}});
      }
      return json{{"ok", true},
                  {"receipts", receipts},
                  {"errors", errors},
                  {"anomalies", result.anomalies}}
          .dump();
    }
    if (op == "query") {
      QueryRequirement r = requirement_from_json(payload.dump());
      FusedContext ctx = engine_->retrieve(r);
      return make_query_response(canonical_payload(ctx));
    }
    if (op == "stats") {
      return json{{"ok", true},
                  {"static", store_->row_count(Partition::Static)},
                  {"high_freq", store_->row_count(Partition::HF)},
                  {"low_freq", store_->row_count(Partition::SF)},
                  {"total", store_->total_rows()}}
          .dump();
    }
    if (op == "refresh_static") {
      const std::string iid = payload.at("intersection_id").get<std::string>();
      std::vector<KnowledgeEntry> entries;
      for (const auto& je : payload.at("entries")) {
        entries.push_back(knowledge_entry_from_json(je.dump()));
      }
      store_->refresh_static(iid, entries);
      return json{{"ok", true}, {"count", entries.size()}}.dump();
    }
    return json{{"error", "unknown_op"}, {"detail", op}}.dump();
  } catch (const std::exception& ex) {
    return json{{"error", "op_failed"}, {"detail", ex.what()}}.dump();
  }
}

}  // namespace unipool
