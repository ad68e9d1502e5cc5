// Copyright 2026 The SharedMF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sharedmf/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

#include "sharedmf/errors.hpp"

namespace sharedmf {

void Channel::send(const Frame& f) {
  {
    std::lock_guard<std::mutex> lk(tap_mu_);
    if (tap_) {
      const auto bytes = serialize(f);
      tap_(bytes);
    }
  }
  // Counted before the frame becomes visible to the receiver, so a reader
  // that has seen the frame also sees the count.
  bytes_sent_ += f.encoded_size();
  ++frames_sent_;
  try {
    do_send(f);
  } catch (...) {
    bytes_sent_ -= f.encoded_size();
    --frames_sent_;
    throw;
  }
}

Frame Channel::receive(std::chrono::milliseconds timeout) {
  return do_receive(timeout);
}

void Channel::set_tap(Tap tap) {
  std::lock_guard<std::mutex> lk(tap_mu_);
  tap_ = std::move(tap);
}

namespace {

class MemoryChannel final : public Channel {
 public:
  using Channel::Channel;

  void close() override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 protected:
  void do_send(const Frame& f) override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (closed_) throw TransportError(name() + ": send on closed channel");
      queue_.push_back(f);
    }
    cv_.notify_one();
  }

  Frame do_receive(std::chrono::milliseconds timeout) override {
    std::unique_lock<std::mutex> lk(mu_);
    if (!cv_.wait_for(lk, timeout,
                      [&] { return !queue_.empty() || closed_; })) {
      throw TransportError(name() + ": receive timed out");
    }
    if (queue_.empty()) throw TransportError(name() + ": channel closed");
    Frame f = std::move(queue_.front());
    queue_.pop_front();
    return f;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Frame> queue_;
  bool closed_ = false;
};

std::string errno_str(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

// Loopback TCP pipe. A writer thread drains an outgoing queue so that send()
// never blocks on a full kernel buffer, which keeps single-threaded
// schedules deadlock-free.
class SocketChannel final : public Channel {
 public:
  explicit SocketChannel(std::string name) : Channel(std::move(name)) {
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw TransportError(errno_str("socket"));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
            0 ||
        ::listen(listener, 1) < 0 ||
        ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) <
            0) {
      const std::string err = errno_str("listen");
      ::close(listener);
      throw TransportError(err);
    }
    write_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (write_fd_ < 0 ||
        ::connect(write_fd_, reinterpret_cast<sockaddr*>(&addr),
                  sizeof(addr)) < 0) {
      const std::string err = errno_str("connect");
      ::close(listener);
      if (write_fd_ >= 0) ::close(write_fd_);
      throw TransportError(err);
    }
    read_fd_ = ::accept(listener, nullptr, nullptr);
    ::close(listener);
    if (read_fd_ < 0) {
      const std::string err = errno_str("accept");
      ::close(write_fd_);
      throw TransportError(err);
    }
    int one = 1;
    ::setsockopt(write_fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    writer_ = std::thread([this] { write_loop(); });
  }

  ~SocketChannel() override {
    close();
    if (writer_.joinable()) writer_.join();
    ::close(write_fd_);
    ::close(read_fd_);
  }

  void close() override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (closed_) return;
      closed_ = true;
    }
    cv_.notify_all();
    ::shutdown(read_fd_, SHUT_RD);
  }

 protected:
  void do_send(const Frame& f) override {
    auto bytes = serialize(f);
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (closed_) throw TransportError(name() + ": send on closed channel");
      if (write_error_) throw TransportError(name() + ": " + write_msg_);
      outgoing_.push_back(std::move(bytes));
    }
    cv_.notify_all();
  }

  Frame do_receive(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::uint8_t header[kFrameHeaderBytes];
    read_exact(header, sizeof(header), deadline);
    const FrameHeader h = parse_header(header);
    std::vector<std::uint8_t> buf(kFrameHeaderBytes + h.payload_bytes());
    std::memcpy(buf.data(), header, kFrameHeaderBytes);
    read_exact(buf.data() + kFrameHeaderBytes, h.payload_bytes(), deadline);
    std::size_t used = 0;
    return parse_frame(buf, used);
  }

 private:
  void read_exact(std::uint8_t* dst, std::size_t n,
                  std::chrono::steady_clock::time_point deadline) {
    std::size_t got = 0;
    while (got < n) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TransportError(name() + ": receive timed out");
      pollfd p{read_fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(errno_str("poll"));
      }
      if (rc == 0) continue;
      const ssize_t r = ::recv(read_fd_, dst + got, n - got, 0);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw TransportError(name() + ": " + errno_str("recv"));
      }
      if (r == 0) throw TransportError(name() + ": channel closed");
      got += static_cast<std::size_t>(r);
    }
  }

  void write_loop() {
    for (;;) {
      std::vector<std::uint8_t> bytes;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return !outgoing_.empty() || closed_; });
        if (outgoing_.empty()) break;
        bytes = std::move(outgoing_.front());
        outgoing_.pop_front();
      }
      std::size_t off = 0;
      while (off < bytes.size()) {
        const ssize_t w = ::send(write_fd_, bytes.data() + off,
                                 bytes.size() - off, MSG_NOSIGNAL);
        if (w < 0) {
          if (errno == EINTR) continue;
          std::lock_guard<std::mutex> lk(mu_);
          write_error_ = true;
          write_msg_ = errno_str("send");
          return;
        }
        off += static_cast<std::size_t>(w);
      }
    }
    ::shutdown(write_fd_, SHUT_WR);
  }

  int write_fd_ = -1;
  int read_fd_ = -1;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> outgoing_;
  bool closed_ = false;
  bool write_error_ = false;
  std::string write_msg_;
  std::thread writer_;
};

std::unique_ptr<Channel> make_channel(TransportKind kind, std::string name) {
  return kind == TransportKind::kMemory ? make_memory_channel(std::move(name))
                                        : make_socket_channel(std::move(name));
}

}  // namespace

std::unique_ptr<Channel> make_memory_channel(std::string name) {
  return std::make_unique<MemoryChannel>(std::move(name));
}

std::unique_ptr<Channel> make_socket_channel(std::string name) {
  return std::make_unique<SocketChannel>(std::move(name));
}

Network::Network(std::size_t sources, TransportKind kind, bool peer_mesh)
    : sources_(sources) {
  for (std::size_t s = 0; s < sources; ++s) {
    up_.push_back(make_channel(kind, up_name(s)));
    down_.push_back(make_channel(kind, down_name(s)));
  }
  mesh_.resize(sources * sources);
  if (peer_mesh) {
    for (std::size_t a = 0; a < sources; ++a) {
      for (std::size_t b = 0; b < sources; ++b) {
        if (a != b) mesh_[a * sources + b] = make_channel(kind, peer_name(a, b));
      }
    }
  }
}

Channel& Network::peer(std::size_t from, std::size_t to) {
  if (from >= sources_ || to >= sources_ || !mesh_[from * sources_ + to]) {
    throw TransportError("no peer channel " + peer_name(from, to));
  }
  return *mesh_[from * sources_ + to];
}

std::size_t Network::total_bytes() const {
  std::size_t total = 0;
  for (const Channel* c : channels()) total += c->bytes_sent();
  return total;
}

std::vector<const Channel*> Network::channels() const {
  std::vector<const Channel*> out;
  for (const auto& c : down_) out.push_back(c.get());
  for (const auto& c : up_) out.push_back(c.get());
  for (const auto& c : mesh_) {
    if (c) out.push_back(c.get());
  }
  return out;
}

Channel* Network::find(const std::string& name) {
  for (auto* group : {&down_, &up_, &mesh_}) {
    for (auto& c : *group) {
      if (c && c->name() == name) return c.get();
    }
  }
  return nullptr;
}

void Network::close_all() {
  for (auto* group : {&down_, &up_, &mesh_}) {
    for (auto& c : *group) {
      if (c) c->close();
    }
  }
}

std::string Network::up_name(std::size_t s) {
  return "source" + std::to_string(s) + "->server";
}

std::string Network::down_name(std::size_t s) {
  return "server->source" + std::to_string(s);
}

std::string Network::peer_name(std::size_t from, std::size_t to) {
  return "source" + std::to_string(from) + "->source" + std::to_string(to);
}

}  // namespace sharedmf
