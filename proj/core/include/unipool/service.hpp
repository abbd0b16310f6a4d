#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "unipool/config.hpp"
#include "unipool/dynamics.hpp"
#include "unipool/pipeline.hpp"
#include "unipool/pool_store.hpp"
#include "unipool/query_engine.hpp"

namespace unipool {

// Pool service over the length-prefixed JSON protocol.
// Ops: ingest (records through the full pipeline), query (returns the
// canonical payload verbatim so wire bytes equal the transmission cost),
// stats (per-partition row counts), refresh_static.
class Server {
 public:
  struct Options {
    std::string bind_address = "127.0.0.1";
    int port = 0;  // 0 picks an ephemeral port
    std::filesystem::path store_dir;
    bool store_in_memory = false;
    Config config;
  };

  explicit Server(Options opts);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();  // graceful: drains connections, pending writes are durable
  int port() const { return port_; }

  PoolStore& store() { return *store_; }
  const QueryEngine& engine() const { return *engine_; }

 private:
  Options opts_;
  std::unique_ptr<PoolStore> store_;
  std::unique_ptr<ClassifierState> classifier_;
  std::unique_ptr<IngestPipeline> pipeline_;
  std::unique_ptr<QueryEngine> engine_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::vector<std::thread> conn_threads_;

  void accept_loop();
  void handle_connection(int fd);
  std::string handle_body(const std::string& body);
};

// Builds the query response body. The canonical payload is spliced in as the
// final member so its bytes survive verbatim:
//   {"ok":true,"payload_bytes":N,"payload":<canonical>}
std::string make_query_response(const std::string& canonical_payload);

// Extracts the verbatim payload bytes from a query response body.
std::string extract_query_payload(const std::string& response_body);

}  // namespace unipool
