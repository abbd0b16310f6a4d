#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace unipool {

// Framing: 4-byte big-endian body length, then a UTF-8 JSON body with
// mandatory keys "op" and "payload". Bodies above 1 MiB are protocol
// corruption and close the connection.
constexpr std::size_t kMaxFrameBytes = 1024 * 1024;

// Throws std::length_error above the frame cap.
std::string encode_frame(const std::string& body);

struct FrameDecoder {
  enum class Status { NeedMore, Frame, Oversize };

  // Feeds raw bytes; emits complete bodies in order.
  void feed(const char* data, std::size_t n);
  Status next(std::string& body_out);

 private:
  std::string buf_;
};

// Blocking helpers over a connected socket fd. read_frame returns nullopt on
// orderly EOF, throws on protocol violations.
void write_frame(int fd, const std::string& body);
std::optional<std::string> read_frame(int fd);

// Minimal client for the service protocol: one request frame in, one
// response frame out.
class WireClient {
 public:
  WireClient(const std::string& host, int port);
  ~WireClient();

  WireClient(const WireClient&) = delete;
  WireClient& operator=(const WireClient&) = delete;

  std::string request(const std::string& body);
  void send_raw(const std::string& bytes);  // for protocol robustness tests
  std::optional<std::string> read_response();

 private:
  int fd_ = -1;
};

}  // namespace unipool
