#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frax/dataset.hpp"
#include "frax/sha256.hpp"

namespace frax {

// Wire protocol, all integers little-endian.
//
// Client handshake (59 bytes):
//   magic "FRAC" | version u8=1 | spec_hash 32B | epoch u32 | start u64 |
//   count u64 | resolution u16
// Server reply: `count` frames, each app u32 length prefix followed by a body
//   class_id u16 | width u16 | height u16 | channels u8 | payload
// then a digest trailer: u32 0xFFFFFFFE followed by the SHA-256 of the
// concatenated frame bodies. On a rejected handshake the server sends a
// single error frame, u32 0xFFFFFFFF followed by a u16 code, and closes.

constexpr char kStreamMagic[4] = {'F', 'R', 'A', 'C'};
constexpr std::uint8_t kStreamVersion = 1;
constexpr std::uint32_t kErrorSentinel = 0xFFFFFFFFu;
constexpr std::uint32_t kDigestSentinel = 0xFFFFFFFEu;

enum class StreamErrorCode : std::uint16_t {
    bad_magic = 1,
    bad_version = 2,
    bad_request = 3,  // truncated or unreadable handshake
    spec_mismatch = 4,
    bad_resolution = 5,
    bad_count = 6,
    bad_range = 7,
    internal = 8,
};

std::string to_string(StreamErrorCode code);

struct StreamRequest {
    Digest spec_hash{};
    std::uint32_t epoch_index = 0;
    std::uint64_t start_index = 0;
    std::uint64_t count = 0;
    std::uint16_t resolution = 256;
};

std::vector<std::uint8_t> encode_request(const StreamRequest& request);

// Body bytes of one sample frame (everything after the length prefix).
std::vector<std::uint8_t> encode_frame_body(const Sample& sample);

// SHA-256 over the frame bodies of the half-open range, identical to the
// digest trailer the server sends for the same request. Rendering is spread
// over `workers` threads but hashed in index order.
Digest checksum_range(const DatasetSpec& spec, std::uint32_t epoch, std::uint64_t start,
                      std::uint64_t count, int resolution, unsigned workers = 1);

struct StreamServiceConfig {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 0;  // 0 picks an ephemeral port
    unsigned workers = 1;
    unsigned max_inflight = 4;  // per-connection render window
};

// Pull-based TCP sample server. Each connection states its request up front;
// frames are rendered by a shared worker pool but written strictly in index
// order, with at most max_inflight frames buffered per connection.
class StreamService {
public:
    StreamService(DatasetSpec spec, StreamServiceConfig config);
    ~StreamService();
    StreamService(const StreamService&) = delete;
    StreamService& operator=(const StreamService&) = delete;

    void start();
    void stop();
    std::uint16_t port() const { return port_; }

private:
    struct Impl;
    Impl* impl_;
    std::uint16_t port_ = 0;
};

}  // namespace frax
