#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rubble/assets.hpp"
#include "rubble/camera.hpp"
#include "rubble/config.hpp"
#include "rubble/deposition.hpp"
#include "rubble/export.hpp"
#include "rubble/render.hpp"

namespace rubble {

inline constexpr std::size_t kFrameHeaderSize = 24;

enum class PayloadKind : std::uint8_t { RgbZlib = 1 };

/// Little-endian binary frame header; see PROTOCOL.md.
struct FrameHeader {
    std::uint32_t frame_index = 0;
    double timestamp = 0.0;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    PayloadKind kind = PayloadKind::RgbZlib;
    std::uint8_t flags = 0;
    std::uint32_t payload_length = 0;
};

std::array<std::uint8_t, kFrameHeaderSize> encode_header(const FrameHeader& h);
FrameHeader decode_header(const std::uint8_t* bytes, std::size_t size);

/// Header plus zlib-compressed RGB.
std::vector<std::uint8_t> encode_frame(const Frame& frame);
std::vector<std::uint8_t> decode_payload(const std::vector<std::uint8_t>& message, FrameHeader& header);

/// JSON text `{"type":"pose", ...}` sent after each binary frame.
std::string pose_message(long frame_index, double timestamp, const CameraState& camera);

/// Clamp applied to the time between two move commands.
inline constexpr double kMinCommandDt = 1.0 / 240.0;
inline constexpr double kMaxCommandDt = 0.25;

struct SessionSnapshot {
    std::shared_ptr<const Pile> pile;
    CameraState camera;
    LightingRig rig;
    FogField fog;
    SimConfig config;
};

/// One live exploration session: a pile, a camera, lights and fog. Commands
/// and rendering may come from different threads; each frame renders from
/// a consistent snapshot taken at its start.
class Session {
public:
    using Clock = std::chrono::steady_clock;

    explicit Session(const SimConfig& cfg, std::shared_ptr<const Catalog> catalog, double rate = 15.0);
    Session(std::shared_ptr<const Pile> pile, const SimConfig& cfg, std::shared_ptr<const Catalog> catalog,
            double rate = 15.0);

    /// Applies one JSON command and returns the JSON reply. Never throws for
    /// bad input; the reply then has `"type":"error"`.
    std::string handle_command(const std::string& text);
    std::string handle_command(const std::string& text, Clock::time_point now);

    struct Rendered {
        Frame frame;
        std::vector<std::uint8_t> message;
        std::string pose;
    };
    /// Renders the current state as the next frame.
    Rendered render_next();

    [[nodiscard]] SessionSnapshot snapshot() const;
    [[nodiscard]] long frame_index() const;
    [[nodiscard]] double rate() const { return rate_; }
    [[nodiscard]] bool recording() const;
    void stop_recording();

    /// Default camera: 3 m outside the pile footprint, looking at its center.
    static CameraState default_camera(const Pile& pile);

private:
    std::string reply_state(const std::string& cmd) const;
    double now_seconds() const;

    mutable std::mutex mutex_;
    std::shared_ptr<const Catalog> catalog_;
    SessionSnapshot state_;
    long frame_index_ = 0;
    double rate_;
    Clock::time_point epoch_;
    std::optional<Clock::time_point> last_move_;
    std::unique_ptr<DatasetWriter> recorder_;
};

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;
    double rate = 15.0;
    std::string token;  // required as `?token=` when non-empty
};

/// Serves websocket sessions until `stop` becomes true. Each connection gets
/// its own Session starting from `pile`. `on_listen` receives the bound port.
void run_server(const ServerOptions& options, const SimConfig& cfg, std::shared_ptr<const Catalog> catalog,
                std::shared_ptr<const Pile> pile, const std::atomic<bool>& stop,
                const std::function<void(unsigned short)>& on_listen = {});

}  // namespace rubble
