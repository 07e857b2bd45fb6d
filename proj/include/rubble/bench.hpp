#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rubble/error.hpp"
#include "rubble/math.hpp"

namespace rubble {

class BenchError : public Error {
public:
    using Error::Error;
};

struct EstimatedImage {
    std::string name;
    bool registered = false;
    int model_id = -1;
    Vec3 position = Vec3::Zero();  // camera center, world
    Quat orientation = Quat::Identity();  // camera to world
};

struct EstimatedTrajectory {
    std::vector<EstimatedImage> images;
    std::map<int, long> points_per_model;

    [[nodiscard]] long points() const;
    [[nodiscard]] std::map<int, int> model_histogram() const;  // registered images per model
    [[nodiscard]] std::size_t registered_count() const;
};

/// Accepts
///  - a directory of COLMAP text models (`<dir>/<id>/images.txt`,
///    `points3D.txt`) or a single model directory / `images.txt` file;
///  - a plain-text file of `name model_id tx ty tz qx qy qz qw` rows
///    (camera-to-world pose), `name -1` for unregistered images and
///    `points <model_id> <count>` rows.
/// Throws BenchError naming the line of a malformed row or a duplicate name.
EstimatedTrajectory load_estimate(const std::filesystem::path& path);
EstimatedTrajectory parse_colmap_images(std::istream& in, int model_id);
EstimatedTrajectory parse_estimate_rows(std::istream& in);

struct GroundTruthRow {
    double timestamp = 0.0;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
};

std::vector<GroundTruthRow> load_groundtruth(const std::filesystem::path& path);
std::vector<GroundTruthRow> parse_groundtruth(std::istream& in);

struct Similarity {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    [[nodiscard]] Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

struct Alignment {
    Similarity transform;
    double rmse = 0.0;
};

/// Least-squares similarity (Umeyama) taking `est` onto `gt`. Throws
/// BenchError for fewer than 3 pairs or collinear points.
Alignment align_model(const std::vector<Vec3>& est, const std::vector<Vec3>& gt, bool with_scale = true);

inline constexpr double kDefaultOnTrackThreshold = 0.10;  // m

struct BenchReport {
    long sequence_length = 0;
    long registered = 0;
    long on_track_frames = 0;
    int track_segments = 0;
    double pct_on_track = 0.0;      // on-track frames / registered frames
    double pct_of_sequence = 0.0;   // on-track frames / sequence length
    long points = 0;
    std::vector<bool> on_track;     // per frame
    std::vector<int> frame_model;   // per frame, -1 if unregistered
    std::map<int, Alignment> alignments;
    std::map<int, std::string> failed_models;  // model id -> reason

    /// `sequence_length track_segments pct_on_track points`.
    [[nodiscard]] std::string table_row() const;
    [[nodiscard]] std::string key_values() const;
};

/// Maps an image name (`000042.png`, `rgb/000042.png`, `42`) or timestamp
/// to a frame index; -1 if it names no frame.
long frame_index_of(const std::string& name, const std::vector<GroundTruthRow>& gt);

/// Run count of consecutive frames that are on track within one model.
int count_segments(const std::vector<bool>& on_track, const std::vector<int>& frame_model);

BenchReport compute_report(const EstimatedTrajectory& est, const std::vector<GroundTruthRow>& gt,
                           double threshold = kDefaultOnTrackThreshold);

}  // namespace rubble
