#include "accelfwd/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "accelfwd/error.hpp"

namespace accelfwd::net {

namespace {

constexpr std::size_t kReadChunk = 256 * 1024;

[[noreturn]] void raise_errno(ErrorCode code, const std::string& what) {
  raise(code, what + ": " + std::strerror(errno));
}

void set_timeout_opt(int fd, double seconds) {
  timeval tv{};
  if (seconds > 0) {
    tv.tv_sec = static_cast<time_t>(seconds);
    tv.tv_usec = static_cast<suseconds_t>((seconds - double(tv.tv_sec)) * 1e6);
  }
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpTransport() override { close(); }

  void send_chunk(std::vector<std::uint8_t>&& data) override {
    const std::uint8_t* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        raise_errno(ErrorCode::disconnected, "send");
      }
      p += n;
      left -= std::size_t(n);
    }
  }

  std::vector<std::uint8_t> recv_chunk() override {
    std::vector<std::uint8_t> buf(kReadChunk);
    for (;;) {
      ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n > 0) {
        buf.resize(std::size_t(n));
        return buf;
      }
      if (n == 0) return {};
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        raise(ErrorCode::timeout, "recv timed out");
      if (errno == ECONNRESET) return {};
      raise_errno(ErrorCode::disconnected, "recv");
    }
  }

  void set_recv_timeout(double seconds) override { set_timeout_opt(fd_, seconds); }

  void shutdown_read() override { ::shutdown(fd_, SHUT_RD); }

  void close() override {
    int fd = fd_.exchange(-1);
    if (fd >= 0) ::close(fd);
  }

 private:
  std::atomic<int> fd_;
};

sockaddr_in resolve(const std::string& host, std::uint16_t port, ErrorCode code) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
    raise(code, "cannot resolve host " + host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

std::unique_ptr<Transport> connect_tcp(const std::string& endpoint,
                                       double timeout_s) {
  auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon + 1 == endpoint.size())
    raise(ErrorCode::connect_failed, "endpoint must be host:port, got " + endpoint);
  std::string host = endpoint.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(endpoint.substr(colon + 1));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 1 || port > 65535)
    raise(ErrorCode::connect_failed, "bad port in endpoint " + endpoint);

  sockaddr_in addr = resolve(host, std::uint16_t(port), ErrorCode::connect_failed);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) raise_errno(ErrorCode::connect_failed, "socket");

  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    ::close(fd);
    raise_errno(ErrorCode::connect_failed, "connect to " + endpoint);
  }
  if (rc != 0) {
    pollfd pfd{fd, POLLOUT, 0};
    int ms = timeout_s > 0 ? int(timeout_s * 1000) : -1;
    int pr = ::poll(&pfd, 1, ms);
    if (pr <= 0) {
      ::close(fd);
      raise(ErrorCode::connect_failed, "connect to " + endpoint +
                                           (pr == 0 ? " timed out" : " failed"));
    }
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      raise(ErrorCode::connect_failed,
            "connect to " + endpoint + ": " + std::strerror(err));
    }
  }
  fcntl(fd, F_SETFL, flags);
  return std::make_unique<TcpTransport>(fd);
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  sockaddr_in addr = resolve(host, port, ErrorCode::bind_failed);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) raise_errno(ErrorCode::bind_failed, "socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int e = errno;
    ::close(fd_);
    fd_ = -1;
    errno = e;
    raise_errno(ErrorCode::bind_failed, "bind " + host);
  }
  if (::listen(fd_, 64) != 0) {
    ::close(fd_);
    fd_ = -1;
    raise_errno(ErrorCode::bind_failed, "listen");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<Transport> TcpListener::accept() {
  for (;;) {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd >= 0) return std::make_unique<TcpTransport>(cfd);
    if (errno == EINTR) continue;
    return nullptr;  // listener closed
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    // shutdown first so a blocked accept() wakes up
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

// ---- in-process pipe ----

namespace {

struct PipeQueue {
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> q;
  bool writer_closed = false;
  bool reader_closed = false;
};

class PipeTransport final : public Transport {
 public:
  PipeTransport(std::shared_ptr<PipeQueue> rx, std::shared_ptr<PipeQueue> tx)
      : rx_(std::move(rx)), tx_(std::move(tx)) {}
  ~PipeTransport() override { close(); }

  void send_chunk(std::vector<std::uint8_t>&& data) override {
    if (data.empty()) return;
    std::lock_guard lk(tx_->m);
    if (tx_->writer_closed || tx_->reader_closed)
      raise(ErrorCode::disconnected, "pipe closed");
    tx_->q.push_back(std::move(data));
    tx_->cv.notify_one();
  }

  std::vector<std::uint8_t> recv_chunk() override {
    std::unique_lock lk(rx_->m);
    auto ready = [&] {
      return !rx_->q.empty() || rx_->writer_closed || rx_->reader_closed;
    };
    if (timeout_s_ > 0) {
      if (!rx_->cv.wait_for(lk, std::chrono::duration<double>(timeout_s_), ready))
        raise(ErrorCode::timeout, "recv timed out");
    } else {
      rx_->cv.wait(lk, ready);
    }
    if (rx_->reader_closed) return {};
    if (!rx_->q.empty()) {
      auto chunk = std::move(rx_->q.front());
      rx_->q.pop_front();
      return chunk;
    }
    return {};  // writer closed, queue drained
  }

  void set_recv_timeout(double seconds) override { timeout_s_ = seconds; }

  void shutdown_read() override {
    std::lock_guard lk(rx_->m);
    rx_->reader_closed = true;
    rx_->cv.notify_all();
  }

  void close() override {
    {
      std::lock_guard lk(tx_->m);
      tx_->writer_closed = true;
      tx_->cv.notify_all();
    }
    shutdown_read();
  }

 private:
  std::shared_ptr<PipeQueue> rx_, tx_;
  double timeout_s_ = 0;
};

}  // namespace

PipePair make_pipe() {
  auto a = std::make_shared<PipeQueue>();
  auto b = std::make_shared<PipeQueue>();
  return {std::make_unique<PipeTransport>(a, b),
          std::make_unique<PipeTransport>(b, a)};
}

}  // namespace accelfwd::net
