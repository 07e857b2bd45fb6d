#include "rubble/export.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "rubble/deposition.hpp"

namespace rubble {

namespace fs = std::filesystem;

namespace {

void put_f32(std::ostream& out, double v) {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    out.write(b, 4);
}

void put_vec(std::ostream& out, const Vec3& v) {
    for (int i = 0; i < 3; ++i) put_f32(out, v[i]);
}

struct PngFile {
    FILE* fp = nullptr;
    explicit PngFile(const fs::path& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {
        if (!fp) throw IoError("cannot open " + path.string());
    }
    ~PngFile() {
        if (fp) std::fclose(fp);
    }
    PngFile(const PngFile&) = delete;
    PngFile& operator=(const PngFile&) = delete;
};

void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_quiet(png_structp, png_const_charp) {}

void write_png(const fs::path& path, int width, int height, int bit_depth, int color_type, const std::uint8_t* data,
               std::size_t row_bytes) {
    PngFile file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: out of memory");
    }
    try {
        png_init_io(png, file.fp);
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 1);
        png_write_info(png, info);
        if (bit_depth == 16) png_set_swap(png);
        for (int y = 0; y < height; ++y) png_write_row(png, data + static_cast<std::size_t>(y) * row_bytes);
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png(const fs::path& path, int& width, int& height, int want_depth, int want_color) {
    PngFile file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: out of memory");
    }
    std::vector<std::uint8_t> out;
    try {
        png_init_io(png, file.fp);
        png_read_info(png, info);
        width = static_cast<int>(png_get_image_width(png, info));
        height = static_cast<int>(png_get_image_height(png, info));
        if (png_get_bit_depth(png, info) != want_depth || png_get_color_type(png, info) != want_color) {
            throw IoError(path.string() + ": unexpected PNG format");
        }
        if (want_depth == 16) png_set_swap(png);
        png_read_update_info(png, info);
        const std::size_t row = png_get_rowbytes(png, info);
        out.resize(row * static_cast<std::size_t>(height));
        for (int y = 0; y < height; ++y) png_read_row(png, out.data() + static_cast<std::size_t>(y) * row, nullptr);
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

std::string format_pattern(const std::string& pattern, long index) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern.c_str(), static_cast<int>(index));
    return buf;
}

}  // namespace

void export_stl(const Pile& pile, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::string header = "rubblesim pile config_hash=" + hash_hex(pile.config_hash) + " seed=" + std::to_string(pile.seed);
    header.resize(80, '\0');
    out.write(header.data(), 80);

    std::uint32_t count = 0;
    for (std::size_t i = 0; i < pile.instances.size(); ++i) {
        count += static_cast<std::uint32_t>(pile.asset(i).render_mesh->triangles().size());
    }
    char cb[4];
    std::memcpy(cb, &count, 4);
    out.write(cb, 4);

    const char attr[2] = {0, 0};
    for (std::size_t i = 0; i < pile.instances.size(); ++i) {
        const ConvexPolyhedron& mesh = *pile.asset(i).render_mesh;
        const Pose pose = pile.pose(i);
        const auto& verts = mesh.vertices();
        for (const auto& t : mesh.triangles()) {
            const Vec3 a = pose.apply(verts[t[0]]), b = pose.apply(verts[t[1]]), c = pose.apply(verts[t[2]]);
            put_vec(out, (b - a).cross(c - a).normalized());
            put_vec(out, a);
            put_vec(out, b);
            put_vec(out, c);
            out.write(attr, 2);
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

StlMesh read_stl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    StlMesh mesh;
    char header[80];
    std::uint32_t count = 0;
    if (!in.read(header, 80) || !in.read(reinterpret_cast<char*>(&count), 4)) {
        throw IoError(path.string() + ": truncated STL header");
    }
    mesh.header.assign(header, 80);
    mesh.header.erase(mesh.header.find_last_not_of('\0') + 1);
    mesh.triangles.resize(count);
    for (auto& tri : mesh.triangles) {
        float f[12];
        char attr[2];
        if (!in.read(reinterpret_cast<char*>(f), sizeof f) || !in.read(attr, 2)) {
            throw IoError(path.string() + ": truncated STL body");
        }
        for (int v = 0; v < 3; ++v) tri[v] = Vec3(f[3 + 3 * v], f[4 + 3 * v], f[5 + 3 * v]);
    }
    return mesh;
}

void voxelize_mesh(const std::vector<std::array<Vec3, 3>>& triangles, VoxelGrid& grid) {
    const int nx = grid.dims.x(), ny = grid.dims.y(), nz = grid.dims.z();
    const double res = grid.resolution;
    // Crossing heights per column with +1 entering (normal down), -1 leaving.
    std::vector<std::vector<std::pair<double, int>>> columns(static_cast<std::size_t>(nx) * ny);
    const Eigen::Vector2d jitter(1.3e-7 * res, 0.7e-7 * res);  // keeps column rays off shared edges
    for (const auto& t : triangles) {
        const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]);
        if (n.z() == 0.0) continue;
        const double lo_x = std::min({t[0].x(), t[1].x(), t[2].x()}), hi_x = std::max({t[0].x(), t[1].x(), t[2].x()});
        const double lo_y = std::min({t[0].y(), t[1].y(), t[2].y()}), hi_y = std::max({t[0].y(), t[1].y(), t[2].y()});
        const int i0 = std::max(0, static_cast<int>(std::ceil((lo_x - grid.origin.x()) / res - 0.5)));
        const int i1 = std::min(nx - 1, static_cast<int>(std::floor((hi_x - grid.origin.x()) / res - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::ceil((lo_y - grid.origin.y()) / res - 0.5)));
        const int j1 = std::min(ny - 1, static_cast<int>(std::floor((hi_y - grid.origin.y()) / res - 0.5)));
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const Eigen::Vector2d p = Eigen::Vector2d(grid.origin.x() + (i + 0.5) * res, grid.origin.y() + (j + 0.5) * res) + jitter;
                auto edge = [&](const Vec3& a, const Vec3& b) {
                    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
                };
                const double w0 = edge(t[1], t[2]), w1 = edge(t[2], t[0]), w2 = edge(t[0], t[1]);
                const bool inside = (w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0);
                const double sum = w0 + w1 + w2;
                if (!inside || sum == 0.0) continue;
                const double z = (w0 * t[0].z() + w1 * t[1].z() + w2 * t[2].z()) / sum;
                columns[static_cast<std::size_t>(j) * nx + i].emplace_back(z, n.z() < 0.0 ? 1 : -1);
            }
        }
    }
    std::fill(grid.solid.begin(), grid.solid.end(), std::uint8_t{0});
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            auto& col = columns[static_cast<std::size_t>(j) * nx + i];
            if (col.empty()) continue;
            std::sort(col.begin(), col.end());
            int winding = 0;
            std::size_t next = 0;
            for (int k = 0; k < nz; ++k) {
                const double zc = grid.origin.z() + (k + 0.5) * res;
                while (next < col.size() && col[next].first <= zc) winding += col[next++].second;
                if (winding > 0) grid.set_solid(i, j, k);
            }
        }
    }
}

void write_png_rgb8(const fs::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != 3ULL * width * height) throw IoError("rgb buffer size mismatch");
    write_png(path, width, height, 8, PNG_COLOR_TYPE_RGB, rgb.data(), 3ULL * width);
}

void write_png_gray16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& px) {
    if (px.size() != 1ULL * width * height) throw IoError("depth buffer size mismatch");
    write_png(path, width, height, 16, PNG_COLOR_TYPE_GRAY, reinterpret_cast<const std::uint8_t*>(px.data()),
              2ULL * width);
}

std::vector<std::uint16_t> read_png_gray16(const fs::path& path, int& width, int& height) {
    const auto bytes = read_png(path, width, height, 16, PNG_COLOR_TYPE_GRAY);
    std::vector<std::uint16_t> out(bytes.size() / 2);
    std::memcpy(out.data(), bytes.data(), out.size() * 2);
    return out;
}

std::vector<std::uint8_t> read_png_rgb8(const fs::path& path, int& width, int& height) {
    return read_png(path, width, height, 8, PNG_COLOR_TYPE_RGB);
}

std::uint16_t depth_to_mm(double meters) {
    if (!(meters > 0.0)) return 0;
    const double mm = std::round(meters * 1000.0);
    return static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
}

std::string groundtruth_row(double timestamp, const Vec3& p, const Quat& q) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f", timestamp, p.x(), p.y(), p.z(), q.x(), q.y(),
                  q.z(), q.w());
    return buf;
}

std::string frame_name(long index) { return format_pattern("%06d.png", index); }

DatasetWriter::DatasetWriter(const Pile& pile, DatasetManifest manifest) : manifest_(std::move(manifest)) {
    std::error_code ec;
    fs::create_directories(manifest_.root / "rgb", ec);
    fs::create_directories(manifest_.root / "depth", ec);
    if (ec) throw IoError("cannot create " + manifest_.root.string() + ": " + ec.message());
    export_stl(pile, manifest_.root / manifest_.stl_path);
    groundtruth_ = "# timestamp tx ty tz qx qy qz qw\n";
}

void DatasetWriter::write(const Frame& frame) {
    if (frame.frame_index != next_) {
        throw IoError("frame index gap: expected " + std::to_string(next_) + ", got " + std::to_string(frame.frame_index));
    }
    write_png_rgb8(manifest_.root / format_pattern(manifest_.rgb_pattern, next_), frame.width, frame.height, frame.rgb);
    std::vector<std::uint16_t> mm(frame.depth.size());
    std::transform(frame.depth.begin(), frame.depth.end(), mm.begin(), depth_to_mm);
    write_png_gray16(manifest_.root / format_pattern(manifest_.depth_pattern, next_), frame.width, frame.height, mm);
    groundtruth_ += groundtruth_row(frame.timestamp, frame.pose.position, frame.pose.orientation) + "\n";
    ++next_;
}

const DatasetManifest& DatasetWriter::finish() {
    manifest_.frame_count = next_;
    {
        std::ofstream gt(manifest_.root / "groundtruth.txt");
        gt << groundtruth_;
        if (!gt) throw IoError("cannot write groundtruth.txt");
    }
    std::ofstream m(manifest_.root / "manifest.txt");
    const Intrinsics& k = manifest_.intrinsics;
    char rate[64];
    std::snprintf(rate, sizeof rate, "%.9g", manifest_.rate);
    m << "format=rubblesim-dataset-1\n"
      << "seed=" << manifest_.seed << "\n"
      << "config_hash=" << hash_hex(config_hash(manifest_.config)) << "\n"
      << "frames=" << manifest_.frame_count << "\n"
      << "rate_hz=" << rate << "\n"
      << "rgb=" << manifest_.rgb_pattern << "\n"
      << "depth=" << manifest_.depth_pattern << "\n"
      << "depth_scale=1000\n"
      << "groundtruth=groundtruth.txt\n"
      << "stl=" << manifest_.stl_path << "\n"
      << "width=" << k.width << "\nheight=" << k.height << "\n";
    char intr[160];
    std::snprintf(intr, sizeof intr, "fx=%.9f\nfy=%.9f\ncx=%.9f\ncy=%.9f\n", k.focal(), k.focal(), k.cx(), k.cy());
    m << intr;
    std::istringstream cfg(serialize(manifest_.config));
    std::string line;
    while (std::getline(cfg, line)) {
        if (!line.empty() && line[0] != '#') m << "config." << line << "\n";
    }
    if (!m) throw IoError("cannot write manifest.txt");
    return manifest_;
}

DatasetManifest write_dataset(const Pile& pile, const SimConfig& cfg, const Trajectory& trajectory,
                              const LightingRig& rig, const FogField& fog, const fs::path& root, std::size_t queue_depth) {
    DatasetManifest manifest;
    manifest.root = root;
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    manifest.rate = trajectory.rate;
    if (!trajectory.samples.empty()) manifest.intrinsics = trajectory.samples.front().state.intrinsics;
    DatasetWriter writer(pile, manifest);

    BoundedQueue<Frame> queue(queue_depth);
    std::exception_ptr failure;
    std::thread producer([&] {
        try {
            for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
                const auto& s = trajectory.samples[i];
                Frame f = render_frame(pile.scene, s.state, rig, fog, s.t);
                f.frame_index = static_cast<long>(i);
                queue.push(std::move(f));
            }
        } catch (...) {
            failure = std::current_exception();
        }
        queue.close();
    });
    try {
        while (auto frame = queue.pop()) writer.write(*frame);
    } catch (...) {
        queue.close();
        producer.join();
        throw;
    }
    producer.join();
    if (failure) std::rethrow_exception(failure);
    return writer.finish();
}

std::vector<std::pair<std::string, std::string>> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
        out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return out;
}

}  // namespace rubble
