#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rubble/math.hpp"
#include "rubble/polyhedron.hpp"
#include "rubble/rng.hpp"

namespace rubble {

struct BoxShape {
    Vec3 dims;  // full extents along x, y, z (m)
};
struct CylinderShape {
    double radius = 0.0;
    double height = 0.0;  // along local z
};
struct HullShape {
    std::vector<Vec3> vertices;
};
using Shape = std::variant<BoxShape, CylinderShape, HullShape>;

/// Segment count used when a cylinder is triangulated for rendering/export.
inline constexpr int kCylinderRenderSegments = 48;
/// Segment count of the polygonal prism used as a cylinder's collider.
inline constexpr int kCylinderCollisionSegments = 16;

/// One debris archetype. The local frame is centered on the center of mass
/// and aligned with the principal axes, so the inertia tensor is diagonal.
struct AssetClass {
    std::string id;
    Shape shape;
    double density = 2400.0;
    double friction = 0.6;
    double restitution = 0.05;
    double weight = 1.0;
    Vec3 albedo = Vec3(0.55, 0.55, 0.52);
    std::optional<std::string> texture_id;

    // Derived on construction by finalize_asset().
    double volume = 0.0;
    double mass = 0.0;
    Vec3 inertia = Vec3::Zero();  // principal moments, kg m^2
    std::shared_ptr<const ConvexPolyhedron> collider;
    std::shared_ptr<const ConvexPolyhedron> render_mesh;

    /// Exact point-in-shape test in the local frame.
    [[nodiscard]] bool contains(const Vec3& local) const;
    [[nodiscard]] double bounding_radius() const { return render_mesh->bounding_radius(); }
};

/// Validates the shape, recenters hulls on their centroid/principal axes and
/// computes mass, inertia and collision/render meshes. Throws AssetError.
void finalize_asset(AssetClass& asset);

/// Parses one asset definition (key=value lines).
AssetClass parse_asset(std::string_view text, const std::string& default_id);

class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<AssetClass> classes);

    [[nodiscard]] const std::vector<AssetClass>& classes() const { return classes_; }
    [[nodiscard]] std::size_t size() const { return classes_.size(); }
    [[nodiscard]] const AssetClass& at(std::size_t index) const { return classes_.at(index); }
    [[nodiscard]] const AssetClass& find(const std::string& id) const;
    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& id) const;
    [[nodiscard]] double total_weight() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    [[nodiscard]] const std::vector<double>& cumulative_weights() const { return cumulative_; }

    /// Copy with selection weights overridden by `weights` (unlisted classes
    /// keep their own weight). Unknown ids throw AssetError.
    [[nodiscard]] Catalog with_weights(const std::map<std::string, double>& weights) const;

private:
    std::vector<AssetClass> classes_;
    std::vector<double> cumulative_;
    std::map<std::string, std::size_t> index_;
};

/// Loads every `*.asset` file in `dir` (sorted by file name).
Catalog load_catalog(const std::string& dir);

/// The bundled catalog (slabs, beams, cinder blocks, bricks, culverts, chunks).
Catalog default_catalog();
std::string default_catalog_dir();

/// Index of a class drawn with probability weight / total. Exactly one rng draw.
std::size_t sample_class(const Catalog& catalog, Rng& rng);

}  // namespace rubble
