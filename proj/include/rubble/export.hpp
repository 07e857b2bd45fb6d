#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rubble/config.hpp"
#include "rubble/render.hpp"
#include "rubble/voids.hpp"

namespace rubble {

struct Pile;

struct StlMesh {
    std::string header;  // 80 bytes, trailing NULs stripped
    std::vector<std::array<Vec3, 3>> triangles;
};

/// Binary STL of every instance's render mesh in world coordinates (m).
/// The header carries the config hash and seed. Throws IoError.
void export_stl(const Pile& pile, const std::filesystem::path& path);
StlMesh read_stl(const std::filesystem::path& path);

/// Cell-center occupancy of a closed triangle soup by nonzero winding
/// number along +z columns. Fills `grid.solid` in place.
void voxelize_mesh(const std::vector<std::array<Vec3, 3>>& triangles, VoxelGrid& grid);

// PNG helpers. Pixel buffers are row-major.
void write_png_rgb8(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);
void write_png_gray16(const std::filesystem::path& path, int width, int height, const std::vector<std::uint16_t>& px);
std::vector<std::uint16_t> read_png_gray16(const std::filesystem::path& path, int& width, int& height);
std::vector<std::uint8_t> read_png_rgb8(const std::filesystem::path& path, int& width, int& height);

/// Meters to millimeters, rounded, 0 kept for "no hit", saturating at 65535.
std::uint16_t depth_to_mm(double meters);

/// `timestamp tx ty tz qx qy qz qw`, nine decimals each.
std::string groundtruth_row(double timestamp, const Vec3& position, const Quat& orientation);

struct DatasetManifest {
    std::filesystem::path root;
    SimConfig config;
    std::uint64_t seed = 0;
    long frame_count = 0;
    double rate = 30.0;
    std::string rgb_pattern = "rgb/%06d.png";
    std::string depth_pattern = "depth/%06d.png";
    std::string stl_path = "pile.stl";
    Intrinsics intrinsics;
};

std::string frame_name(long index);  // "%06d.png"

/// Streams frames into the dataset layout. Frames must arrive in index order
/// starting at 0. `finish` writes manifest.txt. Throws IoError.
class DatasetWriter {
public:
    DatasetWriter(const Pile& pile, DatasetManifest manifest);
    void write(const Frame& frame);
    const DatasetManifest& finish();
    [[nodiscard]] long written() const { return next_; }

private:
    DatasetManifest manifest_;
    std::string groundtruth_;
    long next_ = 0;
};

/// Renders the trajectory and writes the complete dataset. Rendering runs
/// ahead of disk writes on a bounded queue of `queue_depth` frames.
DatasetManifest write_dataset(const Pile& pile, const SimConfig& cfg, const Trajectory& trajectory,
                              const LightingRig& rig, const FogField& fog, const std::filesystem::path& root,
                              std::size_t queue_depth = 4);

/// Reads `key=value` lines of a manifest.
std::vector<std::pair<std::string, std::string>> read_manifest(const std::filesystem::path& path);

/// Fixed-capacity FIFO: push blocks while full, pop blocks while empty and
/// returns nullopt once closed and drained.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    void push(T value) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return;
        items_.push_back(std::move(value));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T value = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return value;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_full_, not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace rubble
