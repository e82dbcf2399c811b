#include "frax/stream.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>
#include <future>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "frax/bytes.hpp"
#include "frax/worker_pool.hpp"

namespace frax {

namespace {

bool read_full(int fd, void* buf, std::size_t n) {
    auto* p = static_cast<std::uint8_t*>(buf);
    while (n > 0) {
        const ssize_t r = ::recv(fd, p, n, 0);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

bool write_full(int fd, const void* buf, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(buf);
    while (n > 0) {
        const ssize_t r = ::send(fd, p, n, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

}  // namespace

std::string to_string(StreamErrorCode code) {
    switch (code) {
        case StreamErrorCode::bad_magic: return "bad magic";
        case StreamErrorCode::bad_version: return "unsupported protocol version";
        case StreamErrorCode::bad_request: return "truncated handshake";
        case StreamErrorCode::spec_mismatch: return "spec hash mismatch";
        case StreamErrorCode::bad_resolution: return "resolution not in {64, 128, 256}";
        case StreamErrorCode::bad_count: return "count must be at least 1";
        case StreamErrorCode::bad_range: return "range exceeds samples_per_epoch";
        case StreamErrorCode::internal: return "internal server error";
    }
    return "unknown error";
}

std::vector<std::uint8_t> encode_request(const StreamRequest& request) {
    ByteWriter w;
    w.bytes(kStreamMagic, 4);
    w.u8(kStreamVersion);
    w.bytes(request.spec_hash.data(), request.spec_hash.size());
    w.u32(request.epoch_index);
    w.u64(request.start_index);
    w.u64(request.count);
    w.u16(request.resolution);
    return w.take();
}

std::vector<std::uint8_t> encode_frame_body(const Sample& sample) {
    ByteWriter w;
    w.u16(static_cast<std::uint16_t>(sample.class_id));
    w.u16(static_cast<std::uint16_t>(sample.image.width));
    w.u16(static_cast<std::uint16_t>(sample.image.height));
    w.u8(static_cast<std::uint8_t>(sample.image.channels));
    w.bytes(sample.image.pixels.data(), sample.image.pixels.size());
    return w.take();
}

Digest checksum_range(const DatasetSpec& spec, std::uint32_t epoch, std::uint64_t start,
                      std::uint64_t count, int resolution, unsigned workers) {
    const EpochStream stream(spec, epoch, resolution);
    if (start + count < start || start + count > stream.size())
        throw std::out_of_range("checksum_range: range exceeds samples_per_epoch");

    WorkerPool pool(workers);
    const std::uint64_t window = std::max<std::uint64_t>(1, 2 * workers);
    std::deque<std::future<std::vector<std::uint8_t>>> inflight;
    Sha256 digest;
    std::uint64_t next = start;
    const std::uint64_t end = start + count;
    while (next < end || !inflight.empty()) {
        while (next < end && inflight.size() < window) {
            const std::uint64_t i = next++;
            inflight.push_back(pool.submit([&stream, i] { return encode_frame_body(stream.at(i)); }));
        }
        digest.update(inflight.front().get());
        inflight.pop_front();
    }
    return digest.finish();
}

struct StreamService::Impl {
    DatasetSpec spec;
    StreamServiceConfig config;
    Digest spec_hash;
    WorkerPool pool;

    int listen_fd = -1;
    std::thread accept_thread;
    std::mutex mu;
    bool stopping = false;

    struct Conn {
        int fd;
        std::thread thread;
    };
    std::deque<Conn> conns;

    Impl(DatasetSpec s, StreamServiceConfig c)
        : spec(std::move(s)), config(c), spec_hash(spec.spec_hash()), pool(c.workers) {}

    void send_error(int fd, StreamErrorCode code) {
        ByteWriter w;
        w.u32(kErrorSentinel);
        w.u16(static_cast<std::uint16_t>(code));
        write_full(fd, w.data().data(), w.size());
    }

    void serve(int fd) {
        std::uint8_t head[5];
        if (!read_full(fd, head, 4)) return;
        if (std::memcmp(head, kStreamMagic, 4) != 0) {
            send_error(fd, StreamErrorCode::bad_magic);
            return;
        }
        if (!read_full(fd, head + 4, 1)) {
            send_error(fd, StreamErrorCode::bad_request);
            return;
        }
        if (head[4] != kStreamVersion) {
            send_error(fd, StreamErrorCode::bad_version);
            return;
        }
        std::uint8_t body[54];
        if (!read_full(fd, body, sizeof(body))) {
            send_error(fd, StreamErrorCode::bad_request);
            return;
        }
        StreamRequest req;
        ByteReader r(body, sizeof(body));
        r.bytes(req.spec_hash.data(), req.spec_hash.size());
        req.epoch_index = r.u32();
        req.start_index = r.u64();
        req.count = r.u64();
        req.resolution = r.u16();

        if (req.spec_hash != spec_hash) {
            send_error(fd, StreamErrorCode::spec_mismatch);
            return;
        }
        if (req.resolution != 64 && req.resolution != 128 && req.resolution != 256) {
            send_error(fd, StreamErrorCode::bad_resolution);
            return;
        }
        if (req.count < 1) {
            send_error(fd, StreamErrorCode::bad_count);
            return;
        }
        if (req.start_index + req.count < req.start_index ||
            req.start_index + req.count > spec.samples_per_epoch) {
            send_error(fd, StreamErrorCode::bad_range);
            return;
        }

        const EpochStream stream(spec, req.epoch_index, req.resolution);
        const std::uint64_t window = std::max<unsigned>(1, config.max_inflight);
        std::deque<std::future<std::vector<std::uint8_t>>> inflight;
        Sha256 digest;
        std::uint64_t next = req.start_index;
        const std::uint64_t end = req.start_index + req.count;
        try {
            while (next < end || !inflight.empty()) {
                while (next < end && inflight.size() < window) {
                    const std::uint64_t i = next++;
                    inflight.push_back(
                        pool.submit([&stream, i] { return encode_frame_body(stream.at(i)); }));
                }
                const std::vector<std::uint8_t> frame = inflight.front().get();
                inflight.pop_front();
                ByteWriter len;
                len.u32(static_cast<std::uint32_t>(frame.size()));
                if (!write_full(fd, len.data().data(), len.size()) ||
                    !write_full(fd, frame.data(), frame.size()))
                    return;  // client went away
                digest.update(frame);
            }
        } catch (const std::exception&) {
            send_error(fd, StreamErrorCode::internal);
            return;
        }
        ByteWriter trailer;
        trailer.u32(kDigestSentinel);
        const Digest d = digest.finish();
        trailer.bytes(d.data(), d.size());
        write_full(fd, trailer.data().data(), trailer.size());
    }

    void accept_loop() {
        for (;;) {
            const int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR) continue;
                return;  // listener closed
            }
            std::lock_guard<std::mutex> lock(mu);
            if (stopping) {
                ::close(fd);
                continue;
            }
            conns.push_back({fd, {}});
            Conn& c = conns.back();
            c.thread = std::thread([this, &c] {
                serve(c.fd);
                std::lock_guard<std::mutex> inner(mu);
                ::close(c.fd);
                c.fd = -1;
            });
        }
    }
};

StreamService::StreamService(DatasetSpec spec, StreamServiceConfig config) {
    spec.validate();
    impl_ = new Impl(std::move(spec), std::move(config));
}

StreamService::~StreamService() {
    stop();
    delete impl_;
}

void StreamService::start() {
    if (impl_->listen_fd >= 0) throw std::logic_error("stream service already started");

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("stream service: socket() failed");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(impl_->config.port);
    if (::inet_pton(AF_INET, impl_->config.bind_address.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("stream service: invalid bind address '" +
                                 impl_->config.bind_address + "'");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd);
        throw std::runtime_error("stream service: cannot bind " + impl_->config.bind_address +
                                 ":" + std::to_string(impl_->config.port) + ": " + err);
    }
    if (::listen(fd, 16) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd);
        throw std::runtime_error("stream service: listen failed: " + err);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    impl_->listen_fd = fd;
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void StreamService::stop() {
    if (impl_->listen_fd < 0) return;
    ::shutdown(impl_->listen_fd, SHUT_RDWR);
    ::close(impl_->listen_fd);
    impl_->listen_fd = -1;
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        impl_->stopping = true;
        for (auto& c : impl_->conns)
            if (c.fd >= 0) ::shutdown(c.fd, SHUT_RDWR);
    }
    for (auto& c : impl_->conns)
        if (c.thread.joinable()) c.thread.join();
}

}  // namespace frax
