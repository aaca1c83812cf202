#pragma once

// HTTP client for XYZ imagery endpoints plus a bundled mock server. The
// server serves a directory of {x}_{y}.png files or renders synthetic tiles
// on demand from a world seed; the client fetches batches with bounded
// concurrency and exponential retry on transient failures.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "roadnet/geo.hpp"
#include "roadnet/png_io.hpp"
#include "roadnet/raster.hpp"
#include "roadnet/synth.hpp"

namespace roadnet {

struct TileSourceConfig {
    std::string base_url;                                // e.g. "http://127.0.0.1:8080"
    std::string url_template = "/tiles/{z}/{x}/{y}.png";
    int max_concurrent_fetches = 8;
    int retry_attempts = 3;          // total attempts, including the first
    int retry_initial_backoff_ms = 200;
    double retry_backoff_factor = 2.0;
    int timeout_ms = 10000;
    std::string api_key;             // sent as "X-Api-Key"; env overrides
};

inline constexpr const char* kTileApiKeyEnv = "ROADNET_TILE_API_KEY";

struct TileServiceError : std::runtime_error {
    explicit TileServiceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TileFetchResult {
    enum class Status { Image, NotFound, TransportError, DecodeError };

    TileId tile;
    Status status = Status::TransportError;
    RasterTile raster;                    // valid when status == Image
    std::vector<std::uint8_t> png_bytes;  // exact payload bytes when status == Image
    std::string detail;
};

inline std::string expand_url_template(const std::string& tmpl, const TileId& t) {
    std::string out;
    out.reserve(tmpl.size() + 16);
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
            const char c = tmpl[i + 1];
            if (c == 'z') {
                out += std::to_string(t.zoom);
                i += 3;
                continue;
            }
            if (c == 'x') {
                out += std::to_string(t.x);
                i += 3;
                continue;
            }
            if (c == 'y') {
                out += std::to_string(t.y);
                i += 3;
                continue;
            }
        }
        out += tmpl[i++];
    }
    return out;
}

// Fetches one result per requested tile, in request order, with at most
// cfg.max_concurrent_fetches requests in flight. 404 is terminal "no
// imagery"; 5xx and transport failures retry with exponential backoff; a
// non-1280x1280 or undecodable 200 payload is a DecodeError.
inline std::vector<TileFetchResult> fetch_tiles(const TileSourceConfig& cfg,
                                                const std::vector<TileId>& tiles) {
    if (cfg.max_concurrent_fetches < 1)
        throw TileServiceError("max_concurrent_fetches must be >= 1");
    if (cfg.retry_attempts < 1) throw TileServiceError("retry attempts must be >= 1");
    if (cfg.base_url.empty()) throw TileServiceError("base_url must be set");

    std::string api_key = cfg.api_key;
    if (const char* env = std::getenv(kTileApiKeyEnv); env && *env) api_key = env;

    std::vector<TileFetchResult> results(tiles.size());
    if (tiles.empty()) return results;

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("X-Api-Key", api_key);

        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tiles.size()) break;
            const TileId& tile = tiles[i];
            TileFetchResult& res = results[i];
            res.tile = tile;
            const std::string path = expand_url_template(cfg.url_template, tile);

            double backoff_ms = cfg.retry_initial_backoff_ms;
            for (int attempt = 1; attempt <= cfg.retry_attempts; ++attempt) {
                if (attempt > 1) {
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(static_cast<long long>(backoff_ms)));
                    backoff_ms *= cfg.retry_backoff_factor;
                }
                auto resp = client.Get(path, headers);
                if (!resp) {
                    res.status = TileFetchResult::Status::TransportError;
                    res.detail = "transport: " + httplib::to_string(resp.error());
                    continue;  // retry
                }
                if (resp->status == 404) {
                    res.status = TileFetchResult::Status::NotFound;
                    res.detail = "404";
                    break;
                }
                if (resp->status >= 500) {
                    res.status = TileFetchResult::Status::TransportError;
                    res.detail = "http " + std::to_string(resp->status);
                    continue;  // retry
                }
                if (resp->status != 200) {
                    res.status = TileFetchResult::Status::TransportError;
                    res.detail = "http " + std::to_string(resp->status);
                    break;  // unexpected but definitive
                }
                try {
                    RasterTile raster = decode_png(
                        reinterpret_cast<const std::uint8_t*>(resp->body.data()),
                        resp->body.size());
                    if (raster.width != kTileSizePx || raster.height != kTileSizePx) {
                        res.status = TileFetchResult::Status::DecodeError;
                        res.detail = "unexpected dimensions " + std::to_string(raster.width) +
                                     "x" + std::to_string(raster.height);
                        break;
                    }
                    res.status = TileFetchResult::Status::Image;
                    res.raster = std::move(raster);
                    res.png_bytes.assign(resp->body.begin(), resp->body.end());
                    res.detail.clear();
                } catch (const PngError& e) {
                    res.status = TileFetchResult::Status::DecodeError;
                    res.detail = e.what();
                }
                break;
            }
        }
    };

    const std::size_t n_workers =
        std::min(tiles.size(), static_cast<std::size_t>(cfg.max_concurrent_fetches));
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return results;
}

// Writes each Image outcome as {x}_{y}.png (exact payload bytes); skips the
// rest. Idempotent: a re-run overwrites with identical bytes.
inline int cache_tiles(const std::vector<TileFetchResult>& results,
                       const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    int written = 0;
    for (const TileFetchResult& r : results) {
        if (r.status != TileFetchResult::Status::Image) continue;
        const auto path = dir / (std::to_string(r.tile.x) + "_" + std::to_string(r.tile.y) + ".png");
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw TileServiceError("cannot open " + path.string() + " for writing");
        os.write(reinterpret_cast<const char*>(r.png_bytes.data()),
                 static_cast<std::streamsize>(r.png_bytes.size()));
        if (!os) throw TileServiceError("short write to " + path.string());
        ++written;
    }
    return written;
}

struct RequestLogEntry {
    std::string path;
    int status = 0;
    std::chrono::steady_clock::time_point when;
};

// Mock XYZ tile server. Dir mode serves {x}_{y}.png files; generator mode
// renders scene_for_tile(seed, z, x, y) on demand, so any URL is answerable
// and byte-identical across requests. Test hooks: a request log, an in-flight
// concurrency gauge and a scripted failure counter.
class TileServer {
public:
    struct Options {
        std::string bind_address = "127.0.0.1";
        int port = 0;  // 0: pick any free port
        std::string url_template = "/tiles/{z}/{x}/{y}.png";
        // dir mode
        std::filesystem::path dir;
        // generator mode (used when dir is empty)
        std::uint64_t world_seed = 0;
        int generator_zoom = -1;  // when >= 0, other zooms answer 404
        SynthConfig synth;
        RenderStyle style;
        std::string required_api_key;  // when set, X-Api-Key must match
        int artificial_delay_ms = 0;   // test hook
    };

    explicit TileServer(Options opts) : opts_(std::move(opts)) {
        if (!opts_.dir.empty() && !std::filesystem::is_directory(opts_.dir))
            throw TileServiceError("tile directory " + opts_.dir.string() + " does not exist");

        // SO_REUSEADDR only: a second server on a live port must fail loudly
        // rather than silently load-balance via SO_REUSEPORT.
        server_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                       sizeof yes);
        });

        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok", "text/plain");
            log_request("/healthz", 200);
        });
        server_.Get(template_regex(opts_.url_template),
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_tile(req, res);
                    });

        if (opts_.port == 0) {
            port_ = server_.bind_to_any_port(opts_.bind_address);
            if (port_ < 0) throw TileServiceError("failed to bind to any port");
        } else {
            if (!server_.bind_to_port(opts_.bind_address, opts_.port))
                throw TileServiceError("failed to bind to port " + std::to_string(opts_.port));
            port_ = opts_.port;
        }
        thread_ = std::thread([this]() { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    TileServer(const TileServer&) = delete;
    TileServer& operator=(const TileServer&) = delete;

    ~TileServer() { stop(); }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string base_url() const {
        return "http://" + opts_.bind_address + ":" + std::to_string(port_);
    }

    std::vector<RequestLogEntry> request_log() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return log_;
    }

    long long request_count(const std::string& path) const {
        std::lock_guard<std::mutex> lock(mutex_);
        long long n = 0;
        for (const auto& e : log_)
            if (e.path == path) ++n;
        return n;
    }

    int max_observed_concurrency() const { return max_in_flight_.load(); }

    // The next `n` tile requests answer with `status` instead of content.
    void script_failures(int n, int status = 500) {
        scripted_failures_.store(n);
        scripted_status_.store(status);
    }

private:
    static std::string template_regex(const std::string& tmpl) {
        std::string re = R"(^)";
        for (std::size_t i = 0; i < tmpl.size();) {
            if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}' &&
                (tmpl[i + 1] == 'z' || tmpl[i + 1] == 'x' || tmpl[i + 1] == 'y')) {
                re += R"((\d+))";
                i += 3;
                continue;
            }
            if (std::string("\\^$.|?*+()[]{}").find(tmpl[i]) != std::string::npos) re += '\\';
            re += tmpl[i++];
        }
        re += '$';
        return re;
    }

    void log_request(const std::string& path, int status) {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.push_back({path, status, std::chrono::steady_clock::now()});
    }

    bool consume_scripted_failure() {
        int n = scripted_failures_.load();
        while (n > 0) {
            if (scripted_failures_.compare_exchange_weak(n, n - 1)) return true;
        }
        return false;
    }

    struct InFlightGuard {
        std::atomic<int>& counter;
        ~InFlightGuard() { counter.fetch_sub(1); }
    };

    void handle_tile(const httplib::Request& req, httplib::Response& res) {
        const int in_flight = in_flight_.fetch_add(1) + 1;
        InFlightGuard guard{in_flight_};
        int seen = max_in_flight_.load();
        while (in_flight > seen && !max_in_flight_.compare_exchange_weak(seen, in_flight)) {
        }

        if (opts_.artificial_delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(opts_.artificial_delay_ms));

        int status = 200;
        if (!opts_.required_api_key.empty() &&
            req.get_header_value("X-Api-Key") != opts_.required_api_key) {
            status = 401;
            res.status = 401;
        } else if (consume_scripted_failure()) {
            status = scripted_status_.load();
            res.status = status;
        } else {
            const TileId tile{std::stoi(req.matches[1].str()),
                              std::stoll(req.matches[2].str()),
                              std::stoll(req.matches[3].str())};
            if (!opts_.dir.empty()) {
                const auto path =
                    opts_.dir / (std::to_string(tile.x) + "_" + std::to_string(tile.y) + ".png");
                std::ifstream is(path, std::ios::binary);
                if (!is) {
                    status = 404;
                    res.status = 404;
                } else {
                    std::string body((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
                    res.set_content(std::move(body), "image/png");
                }
            } else {
                const bool zoom_ok =
                    opts_.generator_zoom < 0 || tile.zoom == opts_.generator_zoom;
                if (!tile_id_valid(tile) || !zoom_ok) {
                    status = 404;
                    res.status = 404;
                } else {
                    const auto scene = scene_for_tile(opts_.world_seed, tile, opts_.synth);
                    const auto bytes = encode_png(render_tile(scene, opts_.style));
                    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                }
            }
        }
        log_request(req.path, status);
    }

    Options opts_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
    mutable std::mutex mutex_;
    std::vector<RequestLogEntry> log_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<int> scripted_failures_{0};
    std::atomic<int> scripted_status_{500};
};

// Spec-shaped conveniences.
inline std::unique_ptr<TileServer> serve_tiles(const std::filesystem::path& dir,
                                               const std::string& bind_address = "127.0.0.1",
                                               int port = 0) {
    TileServer::Options o;
    o.dir = dir;
    o.bind_address = bind_address;
    o.port = port;
    return std::make_unique<TileServer>(std::move(o));
}

inline std::unique_ptr<TileServer> serve_world(std::uint64_t world_seed, int zoom = 16,
                                               const std::string& bind_address = "127.0.0.1",
                                               int port = 0) {
    TileServer::Options o;
    o.world_seed = world_seed;
    o.synth.zoom = zoom;
    o.bind_address = bind_address;
    o.port = port;
    return std::make_unique<TileServer>(std::move(o));
}

}  // namespace roadnet
