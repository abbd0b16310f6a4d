#include "unipool/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace unipool {

std::string encode_frame(const std::string& body) {
  if (body.size() > kMaxFrameBytes) {
    throw std::length_error("frame body exceeds 1 MiB cap");
  }
  std::string out;
  out.reserve(4 + body.size());
  const std::uint32_t n = static_cast<std::uint32_t>(body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

void FrameDecoder::feed(const char* data, std::size_t n) { buf_.append(data, n); }

FrameDecoder::Status FrameDecoder::next(std::string& body_out) {
  if (buf_.size() < 4) return Status::NeedMore;
  const auto* p = reinterpret_cast<const unsigned char*>(buf_.data());
  const std::uint32_t n = (static_cast<std::uint32_t>(p[0]) << 24) |
                          (static_cast<std::uint32_t>(p[1]) << 16) |
                          (static_cast<std::uint32_t>(p[2]) << 8) |
                          static_cast<std::uint32_t>(p[3]);
  if (n > kMaxFrameBytes) return Status::Oversize;
  if (buf_.size() < 4 + static_cast<std::size_t>(n)) return Status::NeedMore;
  body_out = buf_.substr(4, n);
  buf_.erase(0, 4 + static_cast<std::size_t>(n));
  return Status::Frame;
}

namespace {

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket write failed: ") +
                               std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

bool read_exact(int fd, char* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket read failed: ") +
                               std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;  // orderly EOF between frames
      throw std::runtime_error("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

void write_frame(int fd, const std::string& body) {
  const std::string framed = encode_frame(body);
  write_all(fd, framed.data(), framed.size());
}

std::optional<std::string> read_frame(int fd) {
  char hdr[4];
  if (!read_exact(fd, hdr, 4)) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(hdr);
  const std::uint32_t n = (static_cast<std::uint32_t>(p[0]) << 24) |
                          (static_cast<std::uint32_t>(p[1]) << 16) |
                          (static_cast<std::uint32_t>(p[2]) << 8) |
                          static_cast<std::uint32_t>(p[3]);
  if (n > kMaxFrameBytes) {
    throw std::length_error("incoming frame exceeds 1 MiB cap");
  }
  std::string body(n, '\0');
  if (n > 0 && !read_exact(fd, body.data(), n)) {
    throw std::runtime_error("connection closed mid-frame");
  }
  return body;
}

WireClient::WireClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("client socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::runtime_error("bad host address: " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw std::runtime_error(std::string("connect failed: ") +
                             std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

WireClient::~WireClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string WireClient::request(const std::string& body) {
  write_frame(fd_, body);
  auto resp = read_frame(fd_);
  if (!resp) throw std::runtime_error("server closed the connection");
  return *resp;
}

void WireClient::send_raw(const std::string& bytes) {
  write_all(fd_, bytes.data(), bytes.size());
}

std::optional<std::string> WireClient::read_response() { return read_frame(fd_); }

}  // namespace unipool
