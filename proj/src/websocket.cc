#include "builderbench/websocket.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "builderbench/common.h"

namespace builderbench::ws {
namespace {

constexpr const char* kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string Base64(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(n);
  return out;
}

std::string AcceptKey(std::string_view client_key) {
  const std::string joined = std::string(client_key) + kGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  return Base64(std::string_view(reinterpret_cast<const char*>(digest), sizeof(digest)));
}

std::string EncodeFrame(uint8_t opcode, std::string_view payload, bool mask, uint32_t mask_key) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | (opcode & 0x0f)));
  const uint8_t mask_bit = mask ? 0x80 : 0x00;
  const uint64_t len = payload.size();
  if (len < 126) {
    f.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xffff) {
    f.push_back(static_cast<char>(mask_bit | 126));
    f.push_back(static_cast<char>((len >> 8) & 0xff));
    f.push_back(static_cast<char>(len & 0xff));
  } else {
    f.push_back(static_cast<char>(mask_bit | 127));
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  }
  if (!mask) {
    f.append(payload);
    return f;
  }
  const uint8_t key[4] = {static_cast<uint8_t>(mask_key >> 24), static_cast<uint8_t>(mask_key >> 16),
                          static_cast<uint8_t>(mask_key >> 8), static_cast<uint8_t>(mask_key)};
  f.append(reinterpret_cast<const char*>(key), 4);
  for (size_t i = 0; i < payload.size(); ++i) {
    f.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  }
  return f;
}

std::optional<Frame> FrameDecoder::Next() {
  const auto* b = reinterpret_cast<const uint8_t*>(buffer_.data());
  const size_t avail = buffer_.size();
  if (avail < 2) return std::nullopt;
  if (b[0] & 0x70) throw ParseError("websocket frame uses reserved bits");
  Frame f;
  f.fin = (b[0] & 0x80) != 0;
  f.opcode = b[0] & 0x0f;
  const bool masked = (b[1] & 0x80) != 0;
  uint64_t len = b[1] & 0x7f;
  size_t pos = 2;
  if (len == 126) {
    if (avail < 4) return std::nullopt;
    len = (uint64_t{b[2]} << 8) | b[3];
    pos = 4;
  } else if (len == 127) {
    if (avail < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | b[2 + i];
    pos = 10;
  }
  if (len > max_payload_) throw ParseError("websocket frame too large");
  uint8_t key[4] = {0, 0, 0, 0};
  if (masked) {
    if (avail < pos + 4) return std::nullopt;
    std::memcpy(key, b + pos, 4);
    pos += 4;
  }
  if (avail < pos + len) return std::nullopt;
  f.payload.assign(buffer_.data() + pos, len);
  if (masked) {
    for (size_t i = 0; i < len; ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
  }
  buffer_.erase(0, pos + len);
  return f;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    Close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::Close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

bool Socket::SendAll(std::string_view bytes) const {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

Socket Listen(const std::string& host, int port, int* bound_port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw ConfigError("socket() failed");
  const int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw ConfigError("bind address must be an IPv4 literal, got '" + host + "'");
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + ": " +
                      std::strerror(errno));
  }
  if (::listen(s.fd(), 4) != 0) throw ConfigError("listen() failed");
  if (bound_port) {
    socklen_t len = sizeof(addr);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
  }
  return s;
}

std::optional<std::string> ReadHttpHead(const Socket& s, int timeout_ms, std::string* rest) {
  std::string data;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  char buf[4096];
  for (;;) {
    const size_t end = data.find("\r\n\r\n");
    if (end != std::string::npos) {
      if (rest) *rest = data.substr(end + 4);
      return data.substr(0, end + 4);
    }
    if (data.size() > 65536) return std::nullopt;
    const int left = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          deadline - std::chrono::steady_clock::now())
                                          .count());
    if (left <= 0) return std::nullopt;
    pollfd p{s.fd(), POLLIN, 0};
    if (::poll(&p, 1, left) <= 0) return std::nullopt;
    const ssize_t n = ::recv(s.fd(), buf, sizeof(buf), 0);
    if (n <= 0) return std::nullopt;
    data.append(buf, static_cast<size_t>(n));
  }
}

std::string HeaderValue(const std::string& head, const std::string& name) {
  const std::string want = Lower(name) + ":";
  size_t pos = 0;
  while (pos < head.size()) {
    const size_t eol = head.find("\r\n", pos);
    const std::string line = head.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    if (Lower(line.substr(0, want.size())) == want) {
      std::string v = line.substr(want.size());
      const size_t b = v.find_first_not_of(" \t");
      return b == std::string::npos ? "" : v.substr(b, v.find_last_not_of(" \t") - b + 1);
    }
    if (eol == std::string::npos) break;
    pos = eol + 2;
  }
  return "";
}

Client::Client(const std::string& host, int port, const std::string& path) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw ConfigError("cannot resolve " + host);
  }
  socket_ = Socket(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  const int rc = socket_.valid() ? ::connect(socket_.fd(), res->ai_addr, res->ai_addrlen) : -1;
  ::freeaddrinfo(res);
  if (rc != 0) throw ConfigError("cannot connect to " + host + ":" + std::to_string(port));
  const int one = 1;
  ::setsockopt(socket_.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  const std::string key = Base64("builderbench-key");
  const std::string request = "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" +
                              std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                              "Sec-WebSocket-Key: " + key +
                              "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  if (!socket_.SendAll(request)) throw ConfigError("handshake send failed");
  std::string rest;
  const auto head = ReadHttpHead(socket_, 5000, &rest);
  if (!head || head->find(" 101 ") == std::string::npos ||
      HeaderValue(*head, "Sec-WebSocket-Accept") != AcceptKey(key)) {
    throw ConfigError("websocket handshake rejected");
  }
  decoder_.Feed(rest.data(), rest.size());
}

bool Client::SendText(std::string_view text) {
  return socket_.valid() && socket_.SendAll(EncodeFrame(kText, text, true));
}

std::optional<std::string> Client::ReceiveText(int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  char buf[8192];
  for (;;) {
    while (auto f = decoder_.Next()) {
      if (f->opcode == kClose) {
        Close();
        return std::nullopt;
      }
      if (f->opcode == kPing) {
        socket_.SendAll(EncodeFrame(kPong, f->payload, true));
        continue;
      }
      if (f->opcode == kText || f->opcode == kContinuation) {
        partial_ += f->payload;
        if (f->fin) {
          std::string out;
          out.swap(partial_);
          return out;
        }
      }
    }
    if (!socket_.valid()) return std::nullopt;
    const int left = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          deadline - std::chrono::steady_clock::now())
                                          .count());
    if (left <= 0) return std::nullopt;
    pollfd p{socket_.fd(), POLLIN, 0};
    if (::poll(&p, 1, left) <= 0) return std::nullopt;
    const ssize_t n = ::recv(socket_.fd(), buf, sizeof(buf), 0);
    if (n <= 0) {
      Close();
      return std::nullopt;
    }
    decoder_.Feed(buf, static_cast<size_t>(n));
  }
}

void Client::Close() {
  if (socket_.valid()) socket_.SendAll(EncodeFrame(kClose, "", true));
  socket_.Close();
}

}  // namespace builderbench::ws
