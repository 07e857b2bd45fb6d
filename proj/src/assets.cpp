#include "rubble/assets.hpp"

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rubble/error.hpp"

namespace rubble {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> numbers(const std::string& key, std::string_view text) {
    std::vector<double> out;
    std::istringstream is{std::string(text)};
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw AssetError("'" + key + "': malformed number '" + tok + "'");
        }
    }
    return out;
}

double scalar(const std::string& key, std::string_view text) {
    auto v = numbers(key, text);
    if (v.size() != 1) throw AssetError("'" + key + "': expected one number");
    return v[0];
}

}  // namespace

bool AssetClass::contains(const Vec3& p) const {
    return std::visit(
        [&](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BoxShape>) {
                return (p.cwiseAbs().array() <= 0.5 * s.dims.array()).all();
            } else if constexpr (std::is_same_v<T, CylinderShape>) {
                return std::abs(p.z()) <= 0.5 * s.height &&
                       p.x() * p.x() + p.y() * p.y() <= s.radius * s.radius;
            } else {
                return collider->contains(p);
            }
        },
        shape);
}

void finalize_asset(AssetClass& a) {
    if (a.id.empty()) throw AssetError("asset id is empty");
    if (!(a.density > 0.0)) throw AssetError(a.id + ": density must be > 0");
    if (!(a.friction >= 0.0)) throw AssetError(a.id + ": friction must be >= 0");
    if (!(a.restitution >= 0.0 && a.restitution <= 1.0)) throw AssetError(a.id + ": restitution must lie in [0,1]");
    if (!(a.weight >= 0.0)) throw AssetError(a.id + ": weight must be >= 0");
    if (!((a.albedo.array() >= 0.0).all() && (a.albedo.array() <= 1.0).all())) {
        throw AssetError(a.id + ": albedo must lie in [0,1]^3");
    }

    if (auto* box = std::get_if<BoxShape>(&a.shape)) {
        const Vec3 d = box->dims;
        if (!(d.array() > 0.0).all()) throw AssetError(a.id + ": box dimensions must be > 0");
        a.volume = d.prod();
        a.mass = a.density * a.volume;
        a.inertia = a.mass / 12.0 *
                    Vec3(d.y() * d.y() + d.z() * d.z(), d.x() * d.x() + d.z() * d.z(), d.x() * d.x() + d.y() * d.y());
        auto poly = std::make_shared<const ConvexPolyhedron>(ConvexPolyhedron::box(0.5 * d));
        a.collider = poly;
        a.render_mesh = poly;
    } else if (auto* cyl = std::get_if<CylinderShape>(&a.shape)) {
        if (!(cyl->radius > 0.0 && cyl->height > 0.0)) throw AssetError(a.id + ": cylinder dimensions must be > 0");
        const double r = cyl->radius, h = cyl->height;
        a.volume = kPi * r * r * h;
        a.mass = a.density * a.volume;
        const double side = a.mass * (3.0 * r * r + h * h) / 12.0;
        a.inertia = Vec3(side, side, 0.5 * a.mass * r * r);
        a.collider = std::make_shared<const ConvexPolyhedron>(ConvexPolyhedron::prism(r, h, kCylinderCollisionSegments));
        a.render_mesh = std::make_shared<const ConvexPolyhedron>(ConvexPolyhedron::prism(r, h, kCylinderRenderSegments));
    } else {
        auto& hull = std::get<HullShape>(a.shape);
        ConvexPolyhedron poly = ConvexPolyhedron::hull(hull.vertices);
        const MassProperties mp = poly.mass_properties();
        if (!(mp.volume > 0.0)) throw AssetError(a.id + ": hull has no volume");
        Eigen::SelfAdjointEigenSolver<Mat3> eig(mp.inertia);
        Mat3 axes = eig.eigenvectors();
        if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
        poly = poly.transformed(axes.transpose(), mp.centroid);
        for (auto& v : hull.vertices) v = axes.transpose() * (v - mp.centroid);
        a.volume = mp.volume;
        a.mass = a.density * a.volume;
        a.inertia = a.density * eig.eigenvalues();
        auto shared = std::make_shared<const ConvexPolyhedron>(std::move(poly));
        a.collider = shared;
        a.render_mesh = shared;
    }
    if (!(a.mass > 0.0) || !(a.inertia.array() > 0.0).all()) {
        throw AssetError(a.id + ": mass and inertia must be positive");
    }
}

AssetClass parse_asset(std::string_view text, const std::string& default_id) {
    AssetClass a;
    a.id = default_id;
    std::string shape_kind;
    std::vector<double> dims, verts;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw AssetError(default_id + ": line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key == "id") a.id = value;
        else if (key == "shape") shape_kind = value;
        else if (key == "dims") dims = numbers(key, value);
        else if (key == "vertices") verts = numbers(key, value);
        else if (key == "density") a.density = scalar(key, value);
        else if (key == "friction") a.friction = scalar(key, value);
        else if (key == "restitution") a.restitution = scalar(key, value);
        else if (key == "weight") a.weight = scalar(key, value);
        else if (key == "texture") a.texture_id = std::string(value);
        else if (key == "albedo") {
            auto c = numbers(key, value);
            if (c.size() != 3) throw AssetError(default_id + ": albedo needs 3 components");
            a.albedo = Vec3(c[0], c[1], c[2]);
        } else {
            throw AssetError(default_id + ": line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (shape_kind == "box") {
        if (dims.size() != 3) throw AssetError(a.id + ": box needs dims=w h d");
        a.shape = BoxShape{Vec3(dims[0], dims[1], dims[2])};
    } else if (shape_kind == "cylinder") {
        if (dims.size() != 2) throw AssetError(a.id + ": cylinder needs dims=radius height");
        a.shape = CylinderShape{dims[0], dims[1]};
    } else if (shape_kind == "hull") {
        if (verts.size() % 3 != 0 || verts.size() < 12) {
            throw AssetError(a.id + ": hull needs vertices=x y z ... (at least 4)");
        }
        HullShape h;
        for (std::size_t i = 0; i < verts.size(); i += 3) h.vertices.emplace_back(verts[i], verts[i + 1], verts[i + 2]);
        a.shape = std::move(h);
    } else {
        throw AssetError(a.id + ": shape must be box, cylinder or hull");
    }
    finalize_asset(a);
    return a;
}

Catalog::Catalog(std::vector<AssetClass> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) throw AssetError("no asset classes");
    double total = 0.0;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (!index_.emplace(classes_[i].id, i).second) {
            throw AssetError("duplicate asset id '" + classes_[i].id + "'");
        }
        total += classes_[i].weight;
        cumulative_.push_back(total);
    }
}

const AssetClass& Catalog::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw AssetError("unknown asset class '" + id + "'");
    return classes_[it->second];
}

std::optional<std::size_t> Catalog::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Catalog Catalog::with_weights(const std::map<std::string, double>& weights) const {
    std::vector<AssetClass> copy = classes_;
    for (const auto& [id, w] : weights) {
        auto it = index_.find(id);
        if (it == index_.end()) throw AssetError("weight given for unknown asset class '" + id + "'");
        copy[it->second].weight = w;
    }
    return Catalog(std::move(copy));
}

Catalog load_catalog(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw AssetError("asset directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".asset") files.push_back(entry.path());
    }
    if (files.empty()) throw AssetError("no asset classes in '" + dir + "'");
    std::sort(files.begin(), files.end());
    std::vector<AssetClass> classes;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw AssetError("cannot read '" + f.string() + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        classes.push_back(parse_asset(ss.str(), f.stem().string()));
    }
    return Catalog(std::move(classes));
}

std::string default_catalog_dir() {
    if (const char* env = std::getenv("RUBBLE_ASSET_DIR")) return env;
    return RUBBLE_ASSET_DIR;
}

Catalog default_catalog() { return load_catalog(default_catalog_dir()); }

std::size_t sample_class(const Catalog& catalog, Rng& rng) {
    const double total = catalog.total_weight();
    if (!(total > 0.0)) throw AssetError("all asset weights are zero");
    const double u = rng.uniform() * total;
    const auto& cum = catalog.cumulative_weights();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    // Skip zero-weight classes that share the boundary.
    std::size_t idx = static_cast<std::size_t>(it - cum.begin());
    while (catalog.at(idx).weight <= 0.0 && idx + 1 < cum.size()) ++idx;
    return idx;
}

}  // namespace rubble
