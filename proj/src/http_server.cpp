#include "epikit/service.hpp"

#include <sys/socket.h>

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <functional>
#include <deque>
#include <set>
#include <thread>

#include "epikit/error.hpp"

namespace epikit::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

/// Parses "/sessions/{id}/stream[?from_seq=N]"; returns false for other paths.
bool stream_target(std::string_view target, std::string& id, std::uint64_t& from_seq) {
    from_seq = 0;
    std::string_view path = target;
    const auto q = target.find('?');
    if (q != std::string_view::npos) {
        path = target.substr(0, q);
        std::string_view query = target.substr(q + 1);
        constexpr std::string_view key = "from_seq=";
        const auto pos = query.find(key);
        if (pos != std::string_view::npos) {
            std::string_view value = query.substr(pos + key.size());
            value = value.substr(0, value.find('&'));
            try {
                from_seq = std::stoull(std::string(value));
            } catch (const std::exception&) {
                from_seq = 0;
            }
        }
    }
    constexpr std::string_view prefix = "/sessions/";
    constexpr std::string_view suffix = "/stream";
    if (path.size() <= prefix.size() + suffix.size() || path.substr(0, prefix.size()) != prefix ||
        path.substr(path.size() - suffix.size()) != suffix)
        return false;
    id = std::string(path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
    return id.find('/') == std::string::npos;
}

}  // namespace

struct HttpServer::Impl {
    std::shared_ptr<SessionManager> manager;
    std::string address;
    std::uint16_t port;

    asio::io_context ioc;
    std::optional<tcp::acceptor> acceptor;
    std::thread accept_thread;

    std::atomic<bool> stopping{false};
    std::mutex mutex;
    std::condition_variable stopped_cv;
    bool stopped = false;
    std::set<int> open_fds;
    std::map<std::uint64_t, std::thread> workers;
    std::vector<std::uint64_t> finished_workers;
    std::uint64_t next_worker = 0;

    void accept_next() {
        acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec || stopping) return;
            std::lock_guard lock(mutex);
            for (std::uint64_t key : finished_workers) {
                auto it = workers.find(key);
                if (it != workers.end() && it->second.joinable()) it->second.join();
                workers.erase(key);
            }
            finished_workers.clear();
            open_fds.insert(socket.native_handle());
            const std::uint64_t key = next_worker++;
            workers.emplace(key, std::thread([this, key, s = std::move(socket)]() mutable {
                serve(std::move(s));
                std::lock_guard done(mutex);
                finished_workers.push_back(key);
            }));
            accept_next();
        });
    }

    void forget(int fd) {
        std::lock_guard lock(mutex);
        open_fds.erase(fd);
    }

    void serve(tcp::socket socket) {
        const int fd = socket.native_handle();
        try {
            beast::flat_buffer buffer;
            for (;;) {
                http::request<http::string_body> req;
                http::read(socket, buffer, req);
                std::string id;
                std::uint64_t from_seq = 0;
                if (websocket::is_upgrade(req) && stream_target(sv(req.target()), id, from_seq)) {
                    stream(std::move(socket), std::move(req), id, from_seq);
                    break;
                }
                ApiResponse r = handle_request(*manager, sv(req.method_string()), sv(req.target()), req.body());
                http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
                res.set(http::field::content_type, "application/json");
                res.keep_alive(req.keep_alive());
                res.body() = r.body.dump();
                res.prepare_payload();
                http::write(socket, res);
                if (!req.keep_alive()) break;
            }
        } catch (const std::exception&) {
            // client went away or sent garbage; drop the connection
        }
        forget(fd);
        beast::error_code ec;
        socket.shutdown(tcp::socket::shutdown_both, ec);
        socket.close(ec);
    }

    /// One WebSocket client on its own io_context: an async read loop notices
    /// the client closing, frames are written in order from a queue, and a
    /// timer polls for server shutdown.
    void stream(tcp::socket socket, http::request<http::string_body> req, const std::string& id,
                std::uint64_t from_seq) {
        asio::io_context ioc;
        tcp::socket local(ioc);
        const auto protocol = socket.local_endpoint().protocol();
        local.assign(protocol, socket.release());
        websocket::stream<tcp::socket> ws(std::move(local));

        std::deque<std::string> queue;
        bool writing = false;
        bool closing = false;
        std::function<void()> write_next = [&] {
            if (writing || closing || queue.empty()) return;
            writing = true;
            ws.async_write(asio::buffer(queue.front()), [&](beast::error_code ec, std::size_t) {
                writing = false;
                queue.pop_front();
                if (ec) {
                    ioc.stop();
                    return;
                }
                write_next();
            });
        };
        // runs under the session lock; only hands the frame to this connection's thread
        auto sink = [&ioc, &queue, &write_next](const Frame& f) {
            asio::post(ioc, [&queue, &write_next, msg = frame_to_json(f).dump()]() mutable {
                queue.push_back(std::move(msg));
                write_next();
            });
        };

        std::uint64_t token = 0;
        try {
            token = manager->subscribe(id, from_seq, sink);
        } catch (const Error& e) {
            // unknown session: refuse the upgrade with a JSON error
            http::response<http::string_body> res{http::status::not_found, req.version()};
            res.set(http::field::content_type, "application/json");
            res.body() = Json{{"code", "not_found"}, {"message", e.what()}, {"field", e.field()}}.dump();
            res.prepare_payload();
            beast::error_code ec;
            http::write(ws.next_layer(), res, ec);
            return;
        }

        try {
            ws.accept(req);
            ws.text(true);
            // shutdown closes this connection itself, with a close frame
            forget(ws.next_layer().native_handle());

            beast::flat_buffer inbox;
            std::function<void()> read_next = [&] {
                ws.async_read(inbox, [&](beast::error_code ec, std::size_t) {
                    if (ec) {
                        // client closed or the connection dropped
                        ioc.stop();
                        return;
                    }
                    inbox.consume(inbox.size());
                    read_next();
                });
            };
            read_next();

            asio::steady_timer timer(ioc);
            std::function<void()> poll = [&] {
                timer.expires_after(std::chrono::milliseconds(200));
                timer.async_wait([&](beast::error_code ec) {
                    if (ec) return;
                    if (stopping && !closing) {
                        closing = true;
                        ws.async_close(websocket::close_code::going_away, [&](beast::error_code) { ioc.stop(); });
                        // a client that never answers the close frame is dropped
                        timer.expires_after(std::chrono::seconds(1));
                        timer.async_wait([&](beast::error_code) { ioc.stop(); });
                        return;
                    }
                    poll();
                });
            };
            poll();
            ioc.run();
        } catch (const std::exception&) {
        }
        manager->unsubscribe(id, token);
    }
};

HttpServer::HttpServer(std::shared_ptr<SessionManager> manager, std::string address, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
    impl_->manager = std::move(manager);
    impl_->address = std::move(address);
    impl_->port = port;
}

HttpServer::~HttpServer() { stop(); }

std::uint16_t HttpServer::start() {
    Impl& s = *impl_;
    beast::error_code ec;
    const auto addr = asio::ip::make_address(s.address, ec);
    if (ec) fail(ErrorKind::InvalidArgument, "bad listen address '" + s.address + "'", "address");
    s.acceptor.emplace(s.ioc);
    tcp::endpoint ep(addr, s.port);
    s.acceptor->open(ep.protocol(), ec);
    if (!ec) s.acceptor->set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) s.acceptor->bind(ep, ec);
    if (!ec) s.acceptor->listen(asio::socket_base::max_listen_connections, ec);
    if (ec) fail(ErrorKind::Runtime, "cannot listen on " + s.address + ":" + std::to_string(s.port) + ": " + ec.message());
    const std::uint16_t bound = s.acceptor->local_endpoint().port();
    s.accept_next();
    s.accept_thread = std::thread([&s] { s.ioc.run(); });
    return bound;
}

void HttpServer::stop() {
    Impl& s = *impl_;
    if (s.stopping.exchange(true)) return;
    asio::post(s.ioc, [&s] {
        beast::error_code ec;
        if (s.acceptor) s.acceptor->close(ec);
    });
    s.ioc.stop();
    if (s.accept_thread.joinable()) s.accept_thread.join();
    std::map<std::uint64_t, std::thread> workers;
    {
        std::lock_guard lock(s.mutex);
        for (int fd : s.open_fds) ::shutdown(fd, SHUT_RDWR);
        workers.swap(s.workers);
    }
    for (auto& [key, t] : workers)
        if (t.joinable()) t.join();
    {
        std::lock_guard lock(s.mutex);
        s.stopped = true;
    }
    s.stopped_cv.notify_all();
}

void HttpServer::wait() {
    std::unique_lock lock(impl_->mutex);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace epikit::service
