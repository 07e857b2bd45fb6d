#include "rubble/server.hpp"

#include <zlib.h>

#include <bit>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <list>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace rubble {

namespace {

using json = nlohmann::json;

template <typename T>
void put_le(std::uint8_t* out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<std::uint8_t>(value >> (8 * i));
}

template <typename T>
T get_le(const std::uint8_t* in) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(in[i]) << (8 * i));
    return value;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat_json(const Quat& q) { return json::array({q.x(), q.y(), q.z(), q.w()}); }

json pose_json(const CameraState& c) {
    return {{"position", vec_json(c.position)}, {"orientation", quat_json(c.orientation)}, {"speed", c.axial_speed}};
}

std::string error_reply(const std::string& message) { return json{{"type", "error"}, {"message", message}}.dump(); }

double number(const json& msg, const char* key, double fallback) {
    if (!msg.contains(key)) return fallback;
    const json& v = msg.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw std::invalid_argument(std::string(key) + " must be finite");
    return d;
}

Vec3 vec3(const json& v, const char* key) {
    if (!v.is_array() || v.size() != 3) throw std::invalid_argument(std::string(key) + " must be [x, y, z]");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_number()) throw std::invalid_argument(std::string(key) + " must be numeric");
        out[i] = v[i].get<double>();
    }
    return out;
}

LightType parse_light_type(const std::string& s) {
    if (s == "spot") return LightType::Spot;
    if (s == "directional") return LightType::Directional;
    if (s == "point") return LightType::Point;
    throw std::invalid_argument("unknown light type " + s);
}

}  // namespace

std::array<std::uint8_t, kFrameHeaderSize> encode_header(const FrameHeader& h) {
    std::array<std::uint8_t, kFrameHeaderSize> out{};
    put_le<std::uint32_t>(out.data() + 0, h.frame_index);
    put_le<std::uint64_t>(out.data() + 4, std::bit_cast<std::uint64_t>(h.timestamp));
    put_le<std::uint16_t>(out.data() + 12, h.width);
    put_le<std::uint16_t>(out.data() + 14, h.height);
    out[16] = static_cast<std::uint8_t>(h.kind);
    out[17] = h.flags;
    put_le<std::uint32_t>(out.data() + 18, h.payload_length);
    return out;
}

FrameHeader decode_header(const std::uint8_t* bytes, std::size_t size) {
    if (size < kFrameHeaderSize) throw Error("frame shorter than header");
    FrameHeader h;
    h.frame_index = get_le<std::uint32_t>(bytes + 0);
    h.timestamp = std::bit_cast<double>(get_le<std::uint64_t>(bytes + 4));
    h.width = get_le<std::uint16_t>(bytes + 12);
    h.height = get_le<std::uint16_t>(bytes + 14);
    h.kind = static_cast<PayloadKind>(bytes[16]);
    h.flags = bytes[17];
    h.payload_length = get_le<std::uint32_t>(bytes + 18);
    return h;
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    uLongf bound = compressBound(static_cast<uLong>(frame.rgb.size()));
    std::vector<std::uint8_t> out(kFrameHeaderSize + bound);
    if (compress2(out.data() + kFrameHeaderSize, &bound, frame.rgb.data(), static_cast<uLong>(frame.rgb.size()), 1) !=
        Z_OK) {
        throw Error("zlib compression failed");
    }
    out.resize(kFrameHeaderSize + bound);
    FrameHeader h;
    h.frame_index = static_cast<std::uint32_t>(frame.frame_index);
    h.timestamp = frame.timestamp;
    h.width = static_cast<std::uint16_t>(frame.width);
    h.height = static_cast<std::uint16_t>(frame.height);
    h.payload_length = static_cast<std::uint32_t>(bound);
    const auto header = encode_header(h);
    std::copy(header.begin(), header.end(), out.begin());
    return out;
}

std::vector<std::uint8_t> decode_payload(const std::vector<std::uint8_t>& message, FrameHeader& header) {
    header = decode_header(message.data(), message.size());
    if (message.size() - kFrameHeaderSize != header.payload_length) throw Error("payload length mismatch");
    if (header.kind != PayloadKind::RgbZlib) throw Error("unknown payload kind");
    uLongf size = static_cast<uLongf>(header.width) * header.height * 3;
    std::vector<std::uint8_t> rgb(size);
    if (uncompress(rgb.data(), &size, message.data() + kFrameHeaderSize, header.payload_length) != Z_OK ||
        size != rgb.size()) {
        throw Error("corrupt payload");
    }
    return rgb;
}

std::string pose_message(long frame_index, double timestamp, const CameraState& camera) {
    json msg = pose_json(camera);
    msg["type"] = "pose";
    msg["frame_index"] = frame_index;
    msg["timestamp"] = timestamp;
    return msg.dump();
}

Session::Session(const SimConfig& cfg, std::shared_ptr<const Catalog> catalog, double rate)
    : Session(std::make_shared<const Pile>(build_pile(cfg, *catalog)), cfg, catalog, rate) {}

Session::Session(std::shared_ptr<const Pile> pile, const SimConfig& cfg, std::shared_ptr<const Catalog> catalog,
                 double rate)
    : catalog_(std::move(catalog)), rate_(rate), epoch_(Clock::now()) {
    if (!(rate > 0.0)) throw Error("rate must be positive");
    Rng rng(cfg.seed ^ 0x4C49474854ULL);
    state_.pile = std::move(pile);
    state_.camera = default_camera(*state_.pile);
    state_.rig = global_light_from_config(cfg, rng);
    state_.fog = fog_from_config(cfg);
    state_.config = cfg;
}

CameraState Session::default_camera(const Pile& pile) {
    Aabb b = pile.bounds();
    if (b.empty()) b = Aabb{Vec3(-1, -1, 0), Vec3(1, 1, 1)};
    const Vec3 center = 0.5 * (b.lo + b.hi);
    const Vec3 eye(b.lo.x() - 3.0, center.y(), std::max(1.0, 0.5 * b.hi.z()));
    CameraState cam;
    cam.position = eye;
    cam.orientation = look_at(eye, Vec3(center.x(), center.y(), 0.5 * eye.z()));
    return cam;
}

double Session::now_seconds() const { return std::chrono::duration<double>(Clock::now() - epoch_).count(); }

std::string Session::handle_command(const std::string& text) { return handle_command(text, Clock::now()); }

std::string Session::handle_command(const std::string& text, Clock::time_point now) {
    try {
        const json msg = json::parse(text);
        if (!msg.is_object() || !msg.contains("cmd") || !msg["cmd"].is_string()) {
            return error_reply("expected an object with a string \"cmd\"");
        }
        const std::string cmd = msg["cmd"];

        if (cmd == "move") {
            MotionCommand mc;
            mc.d_roll = number(msg, "roll", 0.0);
            mc.d_pitch = number(msg, "pitch", 0.0);
            mc.d_yaw = number(msg, "yaw", 0.0);
            mc.axial_speed = number(msg, "speed", 0.0);
            if (msg.contains("headlamp")) mc.headlamp_intensity = number(msg, "headlamp", 0.0);
            std::lock_guard lock(mutex_);
            const auto since = last_move_ ? *last_move_ : epoch_;
            const double dt =
                std::clamp(std::chrono::duration<double>(now - since).count(), kMinCommandDt, kMaxCommandDt);
            state_.camera = apply_command(state_.camera, mc, dt);
            if (mc.headlamp_intensity) {
                state_.rig.headlamp.intensity = std::max(0.0, *mc.headlamp_intensity);
                state_.rig.headlamp.on = state_.rig.headlamp.intensity > 0.0;
            }
            last_move_ = now;
            json reply{{"type", "ack"}, {"cmd", cmd}, {"dt", dt}, {"pose", pose_json(state_.camera)}};
            return reply.dump();
        }

        if (cmd == "light") {
            std::lock_guard lock(mutex_);
            LightingRig rig = state_.rig;
            if (msg.contains("headlamp")) {
                rig.headlamp.intensity = number(msg, "headlamp", 0.0);
                if (rig.headlamp.intensity < 0.0) throw std::invalid_argument("headlamp must be >= 0");
                rig.headlamp.on = rig.headlamp.intensity > 0.0;
            }
            if (msg.contains("headlamp_on")) rig.headlamp.on = msg.at("headlamp_on").get<bool>();
            if (msg.contains("intensity")) {
                rig.global.intensity = number(msg, "intensity", 0.0);
                if (rig.global.intensity < 0.0) throw std::invalid_argument("intensity must be >= 0");
            }
            if (msg.contains("type")) rig.global.type = parse_light_type(msg.at("type").get<std::string>());
            if (msg.contains("rot")) rig.global.rotation_deg = vec3(msg.at("rot"), "rot");
            if (msg.contains("position")) rig.global.position = vec3(msg.at("position"), "position");
            state_.rig = rig;
            return reply_state(cmd);
        }

        if (cmd == "fog") {
            std::lock_guard lock(mutex_);
            FogField fog = state_.fog;
            fog.sigma_base = number(msg, "density", fog.sigma_base);
            fog.noise_amplitude = number(msg, "intensity", fog.noise_amplitude);
            if (fog.sigma_base < 0.0 || fog.noise_amplitude < 0.0) throw std::invalid_argument("fog must be >= 0");
            state_.fog = fog;
            state_.config.fog_density = fog.sigma_base;
            state_.config.fog_intensity = fog.noise_amplitude;
            return reply_state(cmd);
        }

        if (cmd == "regen") {
            SimConfig cfg;
            {
                std::lock_guard lock(mutex_);
                cfg = state_.config;
            }
            if (msg.contains("config")) {
                const json& c = msg.at("config");
                if (c.is_string()) {
                    cfg = parse_config_text(c.get<std::string>(), cfg);
                } else if (c.is_object()) {
                    std::string lines;
                    for (const auto& [k, v] : c.items()) {
                        lines += k + "=" + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
                    }
                    cfg = parse_config_text(lines, cfg);
                } else {
                    throw std::invalid_argument("config must be an object or key=value text");
                }
            }
            if (msg.contains("seed")) {
                const json& s = msg.at("seed");
                if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
                    throw std::invalid_argument("seed must be a non-negative integer");
                }
                cfg.seed = s.get<std::uint64_t>();
            }
            validate(cfg);
            auto pile = std::make_shared<const Pile>(build_pile(cfg, *catalog_));
            Rng rng(cfg.seed ^ 0x4C49474854ULL);
            std::lock_guard lock(mutex_);
            if (recorder_) recorder_->finish();
            recorder_.reset();
            state_.pile = std::move(pile);
            state_.camera = default_camera(*state_.pile);
            state_.rig = global_light_from_config(cfg, rng);
            state_.fog = fog_from_config(cfg);
            state_.config = cfg;
            frame_index_ = 0;
            last_move_.reset();
            json reply = json::parse(reply_state(cmd));
            reply["instances"] = state_.pile->instances.size();
            reply["max_height"] = state_.pile->max_height();
            reply["config_hash"] = hash_hex(config_hash(cfg));
            return reply.dump();
        }

        if (cmd == "record") {
            const bool on = msg.contains("on") ? msg.at("on").get<bool>() : true;
            std::lock_guard lock(mutex_);
            if (!on) {
                long written = recorder_ ? recorder_->written() : 0;
                if (recorder_) recorder_->finish();
                recorder_.reset();
                json reply = json::parse(reply_state(cmd));
                reply["frames"] = written;
                return reply.dump();
            }
            if (!msg.contains("dir") || !msg["dir"].is_string()) throw std::invalid_argument("record needs \"dir\"");
            DatasetManifest manifest;
            manifest.root = msg["dir"].get<std::string>();
            manifest.config = state_.config;
            manifest.seed = state_.config.seed;
            manifest.rate = rate_;
            manifest.intrinsics = state_.camera.intrinsics;
            recorder_ = std::make_unique<DatasetWriter>(*state_.pile, manifest);
            return reply_state(cmd);
        }

        if (cmd == "state") {
            std::lock_guard lock(mutex_);
            return reply_state(cmd);
        }
        return error_reply("unknown cmd " + cmd);
    } catch (const std::exception& e) {
        return error_reply(e.what());
    }
}

std::string Session::reply_state(const std::string& cmd) const {
    const auto& rig = state_.rig;
    json reply{{"type", "ack"},
               {"cmd", cmd},
               {"frame_index", frame_index_},
               {"seed", state_.config.seed},
               {"rate", rate_},
               {"recording", recorder_ != nullptr},
               {"pose", pose_json(state_.camera)},
               {"light",
                {{"type", std::string(to_string(rig.global.type))},
                 {"intensity", rig.global.intensity},
                 {"rot", vec_json(rig.global.rotation_deg)},
                 {"headlamp_on", rig.headlamp.on},
                 {"headlamp", rig.headlamp.intensity}}},
               {"fog", {{"density", state_.fog.sigma_base}, {"intensity", state_.fog.noise_amplitude}}}};
    return reply.dump();
}

Session::Rendered Session::render_next() {
    SessionSnapshot snap;
    long index = 0;
    double t = 0.0;
    {
        std::lock_guard lock(mutex_);
        snap = state_;
        index = frame_index_++;
        t = now_seconds();
    }
    Rendered out;
    out.frame = render_frame(snap.pile->scene, snap.camera, snap.rig, snap.fog, t);
    out.frame.frame_index = index;
    out.message = encode_frame(out.frame);
    out.pose = pose_message(index, t, snap.camera);
    std::lock_guard lock(mutex_);
    if (recorder_ && state_.pile == snap.pile) {
        Frame copy = out.frame;
        copy.frame_index = recorder_->written();
        recorder_->write(copy);
    }
    return out;
}

SessionSnapshot Session::snapshot() const {
    std::lock_guard lock(mutex_);
    return state_;
}

long Session::frame_index() const {
    std::lock_guard lock(mutex_);
    return frame_index_;
}

bool Session::recording() const {
    std::lock_guard lock(mutex_);
    return recorder_ != nullptr;
}

void Session::stop_recording() {
    std::lock_guard lock(mutex_);
    if (recorder_) recorder_->finish();
    recorder_.reset();
}

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

std::string query_param(const std::string& target, const std::string& key) {
    const auto q = target.find('?');
    if (q == std::string::npos) return {};
    std::istringstream query(target.substr(q + 1));
    std::string part;
    while (std::getline(query, part, '&')) {
        const auto eq = part.find('=');
        if (part.substr(0, eq) == key) return eq == std::string::npos ? "" : part.substr(eq + 1);
    }
    return {};
}

// One websocket client. Reads and writes run on the connection's strand;
// a dedicated render worker produces frames and posts them to the strand.
class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, const ServerOptions& options, const SimConfig& cfg,
               std::shared_ptr<const Catalog> catalog, std::shared_ptr<const Pile> pile)
        : ws_(std::move(socket)), options_(options), cfg_(cfg), catalog_(std::move(catalog)), pile_(std::move(pile)) {}

    void start() {
        http::async_read(ws_.next_layer(), buffer_, request_,
                         beast::bind_front_handler(&Connection::on_request, shared_from_this()));
    }

    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->open_) {
                beast::error_code ec;
                self->ws_.next_layer().socket().close(ec);
            }
            self->finish();
        });
    }

    [[nodiscard]] bool finished() const { return finished_; }

    void join() {
        if (worker_.joinable()) worker_.join();
        if (command_worker_.joinable()) command_worker_.join();
    }

private:
    void on_request(beast::error_code ec, std::size_t) {
        if (ec) return finish();
        if (!websocket::is_upgrade(request_)) {
            http::response<http::string_body> res{http::status::bad_request, request_.version()};
            res.set(http::field::content_type, "text/plain");
            res.body() = "websocket endpoint\n";
            res.prepare_payload();
            http::write(ws_.next_layer(), res, ec);
            return finish();
        }
        if (!options_.token.empty() && query_param(std::string(request_.target()), "token") != options_.token) {
            http::response<http::string_body> res{http::status::unauthorized, request_.version()};
            res.body() = "bad token\n";
            res.prepare_payload();
            http::write(ws_.next_layer(), res, ec);
            return finish();
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(request_, beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
    }

    void on_accept(beast::error_code ec) {
        if (ec) return finish();
        try {
            session_ = std::make_shared<Session>(pile_, cfg_, catalog_, options_.rate);
        } catch (const std::exception& e) {
            return finish();
        }
        open_ = true;
        worker_ = std::thread([self = shared_from_this()] { self->render_loop(); });
        command_worker_ = std::thread([self = shared_from_this()] { self->command_loop(); });
        read_next();
    }

    void read_next() {
        buffer_.consume(buffer_.size());
        ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) return finish();
        // Commands such as regen take a while; the strand stays free meanwhile.
        commands_.push(beast::buffers_to_string(buffer_.data()));
    }

    void command_loop() {
        while (auto text = commands_.pop()) {
            std::string reply = session_->handle_command(*text);
            net::post(ws_.get_executor(), [self = shared_from_this(), reply = std::move(reply)]() mutable {
                self->enqueue_text(std::move(reply));
                if (self->open_) self->read_next();
            });
        }
    }

    void render_loop() {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.rate));
        auto next = clock::now();
        while (!stopping_) {
            Session::Rendered r;
            try {
                r = session_->render_next();
            } catch (const std::exception&) {
                break;
            }
            net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(r.message),
                                           pose = std::move(r.pose)]() mutable {
                self->enqueue_frame(std::move(msg), std::move(pose));
            });
            next += period;
            const auto now = clock::now();
            if (next < now) next = now;
            std::unique_lock lock(wake_mutex_);
            wake_.wait_until(lock, next, [&] { return stopping_.load(); });
        }
    }

    void enqueue_text(std::string text) {
        if (!open_) return;
        outbox_.push_back({false, std::vector<std::uint8_t>(text.begin(), text.end())});
        write_next();
    }

    // Latest wins: an unsent frame (and its pose) is replaced.
    void enqueue_frame(std::vector<std::uint8_t> frame, std::string pose) {
        if (!open_) return;
        pending_frame_ = std::move(frame);
        pending_pose_ = std::move(pose);
        write_next();
    }

    void write_next() {
        if (writing_ || !open_) return;
        if (outbox_.empty() && pending_frame_) {
            outbox_.push_back({true, std::move(*pending_frame_)});
            outbox_.push_back({false, std::vector<std::uint8_t>(pending_pose_.begin(), pending_pose_.end())});
            pending_frame_.reset();
        }
        if (outbox_.empty()) return;
        writing_ = true;
        ws_.binary(outbox_.front().binary);
        ws_.async_write(net::buffer(outbox_.front().bytes),
                        beast::bind_front_handler(&Connection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        writing_ = false;
        if (ec) return finish();
        outbox_.pop_front();
        write_next();
    }

    void finish() {
        open_ = false;
        outbox_.clear();
        pending_frame_.reset();
        {
            std::lock_guard lock(wake_mutex_);
            stopping_ = true;
        }
        wake_.notify_all();
        commands_.close();
        if (session_) session_->stop_recording();
        finished_ = true;
    }

    struct Outgoing {
        bool binary;
        std::vector<std::uint8_t> bytes;
    };

    websocket::stream<beast::tcp_stream> ws_;
    ServerOptions options_;
    SimConfig cfg_;
    std::shared_ptr<const Catalog> catalog_;
    std::shared_ptr<const Pile> pile_;
    std::shared_ptr<Session> session_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    std::deque<Outgoing> outbox_;
    std::optional<std::vector<std::uint8_t>> pending_frame_;
    std::string pending_pose_;
    bool writing_ = false;
    bool open_ = false;
    std::atomic<bool> finished_{false};
    std::atomic<bool> stopping_{false};
    std::mutex wake_mutex_;
    std::condition_variable wake_;
    BoundedQueue<std::string> commands_{1};
    std::thread worker_;
    std::thread command_worker_;
};

}  // namespace

void run_server(const ServerOptions& options, const SimConfig& cfg, std::shared_ptr<const Catalog> catalog,
                std::shared_ptr<const Pile> pile, const std::atomic<bool>& stop,
                const std::function<void(unsigned short)>& on_listen) {
    if (!(options.rate > 0.0)) throw Error("rate must be positive");
    net::io_context ioc;
    tcp::acceptor acceptor(ioc, {net::ip::make_address(options.address), options.port});
    if (on_listen) on_listen(acceptor.local_endpoint().port());

    std::list<std::shared_ptr<Connection>> connections;
    std::function<void()> accept_next = [&] {
        acceptor.async_accept(net::make_strand(ioc), [&](beast::error_code ec, tcp::socket socket) {
            if (!ec) {
                auto c = std::make_shared<Connection>(std::move(socket), options, cfg, catalog, pile);
                connections.push_back(c);
                c->start();
            }
            if (acceptor.is_open()) accept_next();
        });
    };
    accept_next();

    auto reap = [&] {
        for (auto it = connections.begin(); it != connections.end();) {
            if ((*it)->finished()) {
                (*it)->join();
                it = connections.erase(it);
            } else {
                ++it;
            }
        }
    };
    while (!stop) {
        ioc.run_for(std::chrono::milliseconds(50));
        reap();
    }
    beast::error_code ec;
    acceptor.close(ec);
    for (auto& c : connections) c->close();
    ioc.restart();
    ioc.run_for(std::chrono::milliseconds(200));
    for (auto& c : connections) c->join();
    connections.clear();
    ioc.stop();
}

}  // namespace rubble
