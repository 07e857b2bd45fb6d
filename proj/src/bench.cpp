#include "rubble/bench.hpp"

#include <Eigen/SVD>
#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rubble {

namespace fs = std::filesystem;

long EstimatedTrajectory::points() const {
    long n = 0;
    for (const auto& [id, count] : points_per_model) n += count;
    return n;
}

std::map<int, int> EstimatedTrajectory::model_histogram() const {
    std::map<int, int> h;
    for (const auto& im : images) {
        if (im.registered) ++h[im.model_id];
    }
    return h;
}

std::size_t EstimatedTrajectory::registered_count() const {
    std::size_t n = 0;
    for (const auto& im : images) n += im.registered ? 1 : 0;
    return n;
}

namespace {

[[noreturn]] void malformed(int line, const std::string& what) {
    throw BenchError("line " + std::to_string(line) + ": " + what);
}

bool blank_or_comment(const std::string& line) {
    const auto p = line.find_first_not_of(" \t\r");
    return p == std::string::npos || line[p] == '#';
}

void merge(EstimatedTrajectory& into, EstimatedTrajectory&& from, std::set<std::string>& names) {
    for (auto& im : from.images) {
        if (!names.insert(im.name).second) throw BenchError("duplicate image name '" + im.name + "'");
        into.images.push_back(std::move(im));
    }
    for (const auto& [id, n] : from.points_per_model) into.points_per_model[id] += n;
}

long count_points3d(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return 0;
    long n = 0;
    std::string line;
    while (std::getline(in, line)) n += blank_or_comment(line) ? 0 : 1;
    return n;
}

EstimatedTrajectory load_colmap_model(const fs::path& dir, int model_id) {
    std::ifstream in(dir / "images.txt");
    if (!in) throw BenchError("cannot open " + (dir / "images.txt").string());
    EstimatedTrajectory est = parse_colmap_images(in, model_id);
    est.points_per_model[model_id] = count_points3d(dir / "points3D.txt");
    return est;
}

}  // namespace

EstimatedTrajectory parse_colmap_images(std::istream& in, int model_id) {
    EstimatedTrajectory est;
    std::set<std::string> names;
    std::string line;
    int lineno = 0;
    bool expect_points = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (expect_points) {
            expect_points = false;
            continue;
        }
        if (blank_or_comment(line)) continue;
        std::istringstream ss(line);
        long image_id;
        double qw, qx, qy, qz, tx, ty, tz;
        long camera_id;
        std::string name;
        if (!(ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> name)) {
            malformed(lineno, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
        }
        if (!names.insert(name).second) throw BenchError("duplicate image name '" + name + "'");
        const Quat q_cw = Quat(qw, qx, qy, qz).normalized();
        EstimatedImage im;
        im.name = name;
        im.registered = true;
        im.model_id = model_id;
        im.orientation = q_cw.conjugate();
        im.position = -(im.orientation * Vec3(tx, ty, tz));
        est.images.push_back(im);
        expect_points = true;
    }
    est.points_per_model[model_id];
    return est;
}

EstimatedTrajectory parse_estimate_rows(std::istream& in) {
    EstimatedTrajectory est;
    std::set<std::string> names;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) tok.push_back(t);
        auto num = [&](const std::string& s) {
            double v = 0.0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size()) malformed(lineno, "not a number: '" + s + "'");
            return v;
        };
        auto integer = [&](const std::string& s) {
            long v = 0;
            const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
            if (r.ec != std::errc() || r.ptr != s.data() + s.size()) malformed(lineno, "not an integer: '" + s + "'");
            return v;
        };
        if (tok[0] == "points") {
            if (tok.size() != 3) malformed(lineno, "expected 'points <model_id> <count>'");
            est.points_per_model[static_cast<int>(integer(tok[1]))] += integer(tok[2]);
            continue;
        }
        EstimatedImage im;
        im.name = tok[0];
        if (tok.size() == 2) {
            if (integer(tok[1]) != -1) malformed(lineno, "an image without a pose must have model id -1");
        } else if (tok.size() == 9) {
            im.registered = true;
            im.model_id = static_cast<int>(integer(tok[1]));
            if (im.model_id < 0) malformed(lineno, "registered image needs a model id >= 0");
            im.position = Vec3(num(tok[2]), num(tok[3]), num(tok[4]));
            im.orientation = Quat(num(tok[8]), num(tok[5]), num(tok[6]), num(tok[7])).normalized();
            est.points_per_model[im.model_id];
        } else {
            malformed(lineno, "expected 'name model_id tx ty tz qx qy qz qw' or 'name -1'");
        }
        if (!names.insert(im.name).second) throw BenchError("duplicate image name '" + im.name + "'");
        est.images.push_back(std::move(im));
    }
    return est;
}

EstimatedTrajectory load_estimate(const fs::path& path) {
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        if (fs::exists(path / "images.txt")) return load_colmap_model(path, 0);
        std::vector<std::pair<int, fs::path>> models;
        for (const auto& entry : fs::directory_iterator(path)) {
            const std::string stem = entry.path().filename().string();
            int id = 0;
            const auto r = std::from_chars(stem.data(), stem.data() + stem.size(), id);
            if (entry.is_directory() && r.ec == std::errc() && r.ptr == stem.data() + stem.size() &&
                fs::exists(entry.path() / "images.txt")) {
                models.emplace_back(id, entry.path());
            }
        }
        std::sort(models.begin(), models.end());
        EstimatedTrajectory est;
        std::set<std::string> names;
        for (const auto& [id, dir] : models) merge(est, load_colmap_model(dir, id), names);
        return est;
    }
    if (path.filename() == "images.txt") return load_colmap_model(path.parent_path(), 0);
    std::ifstream in(path);
    if (!in) throw BenchError("cannot open " + path.string());
    return parse_estimate_rows(in);
}

std::vector<GroundTruthRow> parse_groundtruth(std::istream& in) {
    std::vector<GroundTruthRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        std::istringstream ss(line);
        GroundTruthRow r;
        double tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> r.timestamp >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            malformed(lineno, "expected 'timestamp tx ty tz qx qy qz qw'");
        }
        r.position = Vec3(tx, ty, tz);
        r.orientation = Quat(qw, qx, qy, qz);
        rows.push_back(r);
    }
    return rows;
}

std::vector<GroundTruthRow> load_groundtruth(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw BenchError("cannot open " + path.string());
    return parse_groundtruth(in);
}

Alignment align_model(const std::vector<Vec3>& est, const std::vector<Vec3>& gt, bool with_scale) {
    if (est.size() != gt.size()) throw BenchError("alignment needs paired points");
    const auto n = static_cast<Eigen::Index>(est.size());
    if (n < 3) throw BenchError("alignment needs at least 3 correspondences, got " + std::to_string(n));
    Eigen::Matrix3Xd src(3, n), dst(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        src.col(i) = est[static_cast<std::size_t>(i)];
        dst.col(i) = gt[static_cast<std::size_t>(i)];
    }
    for (const Eigen::Matrix3Xd* m : {&src, &dst}) {
        const Eigen::Matrix3Xd centered = m->colwise() - m->rowwise().mean();
        const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3Xd>(centered).singularValues();
        if (sv[0] <= 0.0 || sv[1] <= 1e-9 * sv[0]) throw BenchError("degenerate alignment: points are collinear");
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, with_scale);
    Alignment out;
    const Mat3 sr = t.topLeftCorner<3, 3>();
    out.transform.scale = with_scale ? std::cbrt(sr.determinant()) : 1.0;
    out.transform.rotation = sr / out.transform.scale;
    out.transform.translation = t.topRightCorner<3, 1>();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += (out.transform.apply(src.col(i)) - dst.col(i)).squaredNorm();
    out.rmse = std::sqrt(sum / static_cast<double>(n));
    return out;
}

long frame_index_of(const std::string& name, const std::vector<GroundTruthRow>& gt) {
    double ts = 0.0;
    const auto rt = std::from_chars(name.data(), name.data() + name.size(), ts);
    if (rt.ec == std::errc() && rt.ptr == name.data() + name.size() && name.find('.') != std::string::npos) {
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (std::abs(gt[i].timestamp - ts) < 1e-6) return static_cast<long>(i);
        }
        return -1;
    }
    const std::string stem = fs::path(name).stem().string();
    long index = -1;
    const auto r = std::from_chars(stem.data(), stem.data() + stem.size(), index);
    if (r.ec == std::errc() && r.ptr == stem.data() + stem.size()) {
        return index >= 0 && index < static_cast<long>(gt.size()) ? index : -1;
    }
    return -1;
}

int count_segments(const std::vector<bool>& on_track, const std::vector<int>& frame_model) {
    int segments = 0;
    int current = -1;  // model of the open run, -1 when none
    for (std::size_t i = 0; i < on_track.size(); ++i) {
        if (!on_track[i]) {
            current = -1;
            continue;
        }
        if (frame_model[i] != current) {
            ++segments;
            current = frame_model[i];
        }
    }
    return segments;
}

BenchReport compute_report(const EstimatedTrajectory& est, const std::vector<GroundTruthRow>& gt, double threshold) {
    BenchReport rep;
    rep.sequence_length = static_cast<long>(gt.size());
    rep.points = est.points();
    rep.on_track.assign(gt.size(), false);
    rep.frame_model.assign(gt.size(), -1);

    std::map<int, std::vector<std::pair<long, Vec3>>> by_model;
    for (const auto& im : est.images) {
        if (!im.registered) continue;
        const long idx = frame_index_of(im.name, gt);
        if (idx < 0) throw BenchError("image '" + im.name + "' is not a dataset frame");
        rep.frame_model[static_cast<std::size_t>(idx)] = im.model_id;
        by_model[im.model_id].emplace_back(idx, im.position);
        ++rep.registered;
    }

    for (const auto& [model, frames] : by_model) {
        std::vector<Vec3> e, g;
        for (const auto& [idx, p] : frames) {
            e.push_back(p);
            g.push_back(gt[static_cast<std::size_t>(idx)].position);
        }
        try {
            const Alignment a = align_model(e, g, true);
            rep.alignments[model] = a;
            for (std::size_t k = 0; k < frames.size(); ++k) {
                if ((a.transform.apply(e[k]) - g[k]).norm() < threshold) {
                    rep.on_track[static_cast<std::size_t>(frames[k].first)] = true;
                }
            }
        } catch (const BenchError& err) {
            rep.failed_models[model] = err.what();
        }
    }

    for (bool b : rep.on_track) rep.on_track_frames += b ? 1 : 0;
    rep.track_segments = count_segments(rep.on_track, rep.frame_model);
    rep.pct_on_track = rep.registered > 0 ? 100.0 * static_cast<double>(rep.on_track_frames) / static_cast<double>(rep.registered) : 0.0;
    rep.pct_of_sequence = rep.sequence_length > 0
                              ? 100.0 * static_cast<double>(rep.on_track_frames) / static_cast<double>(rep.sequence_length)
                              : 0.0;
    return rep;
}

std::string BenchReport::table_row() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%ld %d %.1f %ld", sequence_length, track_segments, pct_on_track, points);
    return buf;
}

std::string BenchReport::key_values() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "sequence_length=%ld\nregistered=%ld\non_track_frames=%ld\ntrack_segments=%d\npct_on_track=%.1f\n"
                  "pct_of_sequence=%.1f\npoints=%ld\nmodels=%zu\n",
                  sequence_length, registered, on_track_frames, track_segments, pct_on_track, pct_of_sequence, points,
                  alignments.size() + failed_models.size());
    std::string out = buf;
    for (const auto& [id, a] : alignments) {
        std::snprintf(buf, sizeof buf, "model.%d.scale=%.9g\nmodel.%d.rmse=%.9g\n", id, a.transform.scale, id, a.rmse);
        out += buf;
    }
    for (const auto& [id, why] : failed_models) out += "model." + std::to_string(id) + ".failed=" + why + "\n";
    return out;
}

}  // namespace rubble
