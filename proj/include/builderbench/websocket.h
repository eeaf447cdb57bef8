#ifndef BUILDERBENCH_WEBSOCKET_H_
#define BUILDERBENCH_WEBSOCKET_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace builderbench::ws {

enum Opcode : uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA,
};

// Sec-WebSocket-Accept value for a client's Sec-WebSocket-Key.
std::string AcceptKey(std::string_view client_key);

std::string Base64(std::string_view bytes);

struct Frame {
  bool fin = true;
  uint8_t opcode = kText;
  std::string payload;
};

// Serialized frame. Clients must mask; servers must not.
std::string EncodeFrame(uint8_t opcode, std::string_view payload, bool mask = false,
                        uint32_t mask_key = 0x12345678);

// Incremental parser. Feed raw bytes, then pull complete frames. Throws
// ParseError on frames this implementation refuses (oversized, reserved
// bits).
class FrameDecoder {
 public:
  explicit FrameDecoder(size_t max_payload = 1 << 20) : max_payload_(max_payload) {}
  void Feed(const char* data, size_t size) { buffer_.append(data, size); }
  std::optional<Frame> Next();

 private:
  std::string buffer_;
  size_t max_payload_;
};

// Owning TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { Close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void Close();

  // Writes everything or returns false.
  bool SendAll(std::string_view bytes) const;

 private:
  int fd_ = -1;
};

// Listening socket on host:port (port 0 picks a free one). Throws
// ConfigError when binding fails.
Socket Listen(const std::string& host, int port, int* bound_port = nullptr);

// Reads an HTTP request head (through the blank line) with a timeout.
std::optional<std::string> ReadHttpHead(const Socket& s, int timeout_ms, std::string* rest);

// Header value (case-insensitive name) from an HTTP head, or empty.
std::string HeaderValue(const std::string& head, const std::string& name);

// Blocking text-message client, used by tests and the CLI self-check.
class Client {
 public:
  // Throws ConfigError when the connection or handshake fails.
  Client(const std::string& host, int port, const std::string& path = "/");

  bool SendText(std::string_view text);
  // Next text message, or nullopt after `timeout_ms` or on close.
  std::optional<std::string> ReceiveText(int timeout_ms);
  void Close();

 private:
  Socket socket_;
  FrameDecoder decoder_;
  std::string partial_;
};

}  // namespace builderbench::ws

#endif  // BUILDERBENCH_WEBSOCKET_H_
