#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rubble/assets.hpp"
#include "rubble/deposition.hpp"

namespace rubble::test {

inline AssetClass box_class(const std::string& id, const Vec3& dims, double density = 2400.0) {
    AssetClass a;
    a.id = id;
    a.shape = BoxShape{dims};
    a.density = density;
    finalize_asset(a);
    return a;
}

struct Block {
    Vec3 dims;
    Vec3 center;
};

/// Axis-aligned boxes as a pile, one class per block.
inline Pile block_pile(const std::vector<Block>& blocks) {
    std::vector<AssetClass> classes;
    Pile pile;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        classes.push_back(box_class("b" + std::to_string(i), blocks[i].dims));
        BodyInstance inst;
        inst.class_index = i;
        inst.position = blocks[i].center;
        inst.asleep = true;
        pile.instances.push_back(inst);
    }
    pile.catalog = std::make_shared<const Catalog>(std::move(classes));
    pile.rebuild_scene();
    return pile;
}

/// 1 m hollow cube on the ground with 0.2 m walls; cavity [-0.3, 0.3]^2 x [0.2, 0.8].
/// With `hole`, the lid leaves a 0.1 m square opening above x, y in [0, 0.1].
inline Pile hollow_box(bool hole) {
    std::vector<Block> b = {
        {{1.0, 1.0, 0.2}, {0.0, 0.0, 0.1}},
        {{0.2, 1.0, 0.6}, {-0.4, 0.0, 0.5}},
        {{0.2, 1.0, 0.6}, {0.4, 0.0, 0.5}},
        {{0.6, 0.2, 0.6}, {0.0, -0.4, 0.5}},
        {{0.6, 0.2, 0.6}, {0.0, 0.4, 0.5}},
    };
    if (!hole) {
        b.push_back({{1.0, 1.0, 0.2}, {0.0, 0.0, 0.9}});
    } else {
        b.push_back({{0.5, 1.0, 0.2}, {-0.25, 0.0, 0.9}});
        b.push_back({{0.4, 1.0, 0.2}, {0.3, 0.0, 0.9}});
        b.push_back({{0.1, 0.5, 0.2}, {0.05, -0.25, 0.9}});
        b.push_back({{0.1, 0.4, 0.2}, {0.05, 0.3, 0.9}});
    }
    return block_pile(b);
}

}  // namespace rubble::test
