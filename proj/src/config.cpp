#include "rubble/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include "rubble/error.hpp"

namespace rubble {

std::string_view to_string(LightType t) {
    switch (t) {
        case LightType::Spot: return "spot";
        case LightType::Directional: return "directional";
        case LightType::Point: return "point";
    }
    return "directional";
}

std::string_view to_string(PositionDistribution d) {
    return d == PositionDistribution::Gaussian ? "gaussian" : "uniform";
}

namespace {

constexpr std::string_view kWeightPrefix = "assetweight.";

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view field, std::string_view text) {
    text = trim(text);
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError(std::string(field), "expected a finite number, got '" + std::string(text) + "'");
    }
    return v;
}

long long parse_int(std::string_view field, std::string_view text) {
    text = trim(text);
    long long v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError(std::string(field), "expected an integer, got '" + std::string(text) + "'");
    }
    return v;
}

std::uint64_t parse_u64(std::string_view field, std::string_view text) {
    text = trim(text);
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError(std::string(field), "expected an unsigned 64-bit integer, got '" + std::string(text) + "'");
    }
    return v;
}

bool parse_bool(std::string_view field, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "off" || text == "no") return false;
    throw ConfigError(std::string(field), "expected a boolean, got '" + std::string(text) + "'");
}

struct Field {
    std::string name;
    std::string help;
    bool is_bool = false;
    std::function<std::string(const SimConfig&)> get;
    std::function<void(SimConfig&, std::string_view)> set;
};

Field real(std::string name, std::string help, double SimConfig::*member) {
    return {name, std::move(help), false,
            [member](const SimConfig& c) { return format_double(c.*member); },
            [member, name](SimConfig& c, std::string_view v) { c.*member = parse_double(name, v); }};
}

Field component(std::string name, std::string help, Vec3 SimConfig::*member, int axis) {
    return {name, std::move(help), false,
            [member, axis](const SimConfig& c) { return format_double((c.*member)[axis]); },
            [member, axis, name](SimConfig& c, std::string_view v) { (c.*member)[axis] = parse_double(name, v); }};
}

Field boolean(std::string name, std::string help, bool SimConfig::*member) {
    return {name, std::move(help), true,
            [member](const SimConfig& c) { return std::string(c.*member ? "true" : "false"); },
            [member, name](SimConfig& c, std::string_view v) { c.*member = parse_bool(name, v); }};
}

Field integer(std::string name, std::string help, int SimConfig::*member) {
    return {name, std::move(help), false,
            [member](const SimConfig& c) { return std::to_string(c.*member); },
            [member, name](SimConfig& c, std::string_view v) {
                const long long x = parse_int(name, v);
                if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
                    throw ConfigError(name, "value out of integer range");
                }
                c.*member = static_cast<int>(x);
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"seed", "Random seed; fixes the whole run", false,
                     [](const SimConfig& c) { return std::to_string(c.seed); },
                     [](SimConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); }});
        const char* axes[] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a) {
            f.push_back(component(std::string("spawnpos") + axes[a],
                                  std::string("Center position of spawn volume along ") + axes[a] + " (m)",
                                  &SimConfig::spawn_center, a));
        }
        for (int a = 0; a < 3; ++a) {
            f.push_back(component(std::string("spawnbound") + axes[a],
                                  std::string("Spawn volume half-extent along ") + axes[a] + " (m)",
                                  &SimConfig::spawn_half_extent, a));
        }
        f.push_back(integer("numlayers", "Number of layers in pile", &SimConfig::num_layers));
        f.push_back(integer("numobjs", "Objects per layer", &SimConfig::objs_per_layer));
        f.push_back(boolean("setlightrot", "Use the fixed light rotation (else random)",
                            &SimConfig::fixed_light_rotation));
        f.push_back({"lighttype", "Global light type: spot|directional|point", false,
                     [](const SimConfig& c) { return std::string(to_string(c.light_type)); },
                     [](SimConfig& c, std::string_view v) {
                         v = trim(v);
                         if (v == "spot") c.light_type = LightType::Spot;
                         else if (v == "directional") c.light_type = LightType::Directional;
                         else if (v == "point") c.light_type = LightType::Point;
                         else throw ConfigError("lighttype", "expected spot|directional|point, got '" + std::string(v) + "'");
                     }});
        f.push_back(real("lightintensity", "Global light intensity", &SimConfig::light_intensity));
        for (int a = 0; a < 3; ++a) {
            f.push_back(component(std::string("lightrot") + axes[a],
                                  std::string("Light rotation about ") + axes[a] + " (degrees)",
                                  &SimConfig::light_rotation_deg, a));
        }
        for (int a = 0; a < 3; ++a) {
            f.push_back(component(std::string("lightpos") + axes[a],
                                  std::string("Light position along ") + axes[a] + " (m)",
                                  &SimConfig::light_position, a));
        }
        f.push_back(real("fogdensity", "Baseline fog/smoke extinction (1/m)", &SimConfig::fog_density));
        f.push_back(real("fogintensity", "Fog/smoke noise variation amplitude (1/m)", &SimConfig::fog_intensity));
        f.push_back(boolean("headlamp_on", "Enable the camera headlamp", &SimConfig::headlamp_on));
        f.push_back(real("headlamp_intensity", "Headlamp intensity", &SimConfig::headlamp_intensity));
        f.push_back({"position_distribution", "Spawn position distribution: uniform|gaussian", false,
                     [](const SimConfig& c) { return std::string(to_string(c.position_distribution)); },
                     [](SimConfig& c, std::string_view v) {
                         v = trim(v);
                         if (v == "uniform") c.position_distribution = PositionDistribution::Uniform;
                         else if (v == "gaussian") c.position_distribution = PositionDistribution::Gaussian;
                         else throw ConfigError("position_distribution", "expected uniform|gaussian, got '" + std::string(v) + "'");
                     }});
        f.push_back(component("position_sigmax", "Gaussian spawn std-dev along x (m)", &SimConfig::position_sigma, 0));
        f.push_back(component("position_sigmay", "Gaussian spawn std-dev along y (m)", &SimConfig::position_sigma, 1));
        f.push_back(real("voxel_resolution", "Void analysis voxel size (m)", &SimConfig::voxel_resolution));
        return f;
    }();
    return table;
}

const Field* find_field(std::string_view name) {
    for (const auto& f : fields()) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

void set_key(SimConfig& cfg, std::string_view key, std::string_view value) {
    if (key.starts_with(kWeightPrefix)) {
        const std::string id(key.substr(kWeightPrefix.size()));
        if (id.empty()) throw ConfigError(std::string(key), "missing asset class id");
        cfg.asset_weights[id] = parse_double(key, value);
        return;
    }
    const Field* f = find_field(key);
    if (!f) throw ConfigError(std::string(key), "unknown parameter");
    f->set(cfg, value);
}

}  // namespace

bool is_config_key(std::string_view name) {
    return name.starts_with(kWeightPrefix) || find_field(name) != nullptr;
}

void validate(const SimConfig& cfg) {
    const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        if (!(cfg.spawn_half_extent[a] > 0.0)) {
            throw ConfigError(std::string("spawnbound") + axes[a], "must be > 0");
        }
        if (!std::isfinite(cfg.spawn_center[a])) {
            throw ConfigError(std::string("spawnpos") + axes[a], "must be finite");
        }
    }
    if (cfg.num_layers < 1) throw ConfigError("numlayers", "must be >= 1");
    if (cfg.objs_per_layer < 1) throw ConfigError("numobjs", "must be >= 1");
    if (!(cfg.light_intensity >= 0.0)) throw ConfigError("lightintensity", "must be >= 0");
    if (!(cfg.fog_density >= 0.0)) throw ConfigError("fogdensity", "must be >= 0");
    if (!(cfg.fog_intensity >= 0.0)) throw ConfigError("fogintensity", "must be >= 0");
    if (!(cfg.headlamp_intensity >= 0.0)) throw ConfigError("headlamp_intensity", "must be >= 0");
    if (!(cfg.voxel_resolution > 0.0)) throw ConfigError("voxel_resolution", "must be > 0");
    if (cfg.position_distribution == PositionDistribution::Gaussian) {
        if (!(cfg.position_sigma.x() > 0.0)) throw ConfigError("position_sigmax", "must be > 0");
        if (!(cfg.position_sigma.y() > 0.0)) throw ConfigError("position_sigmay", "must be > 0");
    }
    if (cfg.asset_weights.empty()) throw ConfigError("assetweight", "at least one asset weight is required");
    bool any_positive = false;
    for (const auto& [id, w] : cfg.asset_weights) {
        if (!(w >= 0.0)) throw ConfigError(std::string(kWeightPrefix) + id, "must be >= 0");
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw ConfigError("assetweight", "at least one asset weight must be > 0");
}

SimConfig parse_config_text(std::string_view text, const SimConfig& base) {
    SimConfig cfg = base;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected key=value");
        }
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate(cfg);
    return cfg;
}

SimConfig load_config_file(const std::string& path, const SimConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), base);
}

SimConfig parse_config(std::span<const std::string> args) { return parse_config(args, SimConfig{}); }

SimConfig parse_config(std::span<const std::string> args, const SimConfig& base) {
    struct Item {
        std::string key;
        std::string value;
    };
    std::vector<Item> items;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string_view arg = args[i];
        if (!arg.starts_with("--")) throw ConfigError(std::string(arg), "unexpected argument");
        arg.remove_prefix(2);
        std::string key;
        std::optional<std::string> value;
        if (const auto eq = arg.find('='); eq != std::string_view::npos) {
            key = arg.substr(0, eq);
            value = std::string(arg.substr(eq + 1));
        } else {
            key = arg;
        }
        if (key != "config" && !is_config_key(key)) throw ConfigError(key, "unknown flag");
        const Field* f = find_field(key);
        if (!value) {
            const bool next_is_value = i + 1 < args.size() && !std::string_view(args[i + 1]).starts_with("--");
            if (next_is_value) {
                value = args[++i];
            } else if (f && f->is_bool) {
                value = "true";
            } else {
                throw ConfigError(key, "missing value");
            }
        }
        if (key == "config") {
            config_path = *value;
        } else {
            items.push_back({key, *value});
        }
    }
    SimConfig cfg = config_path.empty() ? base : load_config_file(config_path, base);
    for (const auto& it : items) set_key(cfg, it.key, it.value);
    validate(cfg);
    return cfg;
}

std::string serialize(const SimConfig& cfg) {
    std::string out = "# rubblesim configuration\n";
    for (const auto& f : fields()) {
        out += f.name + "=" + f.get(cfg) + "\n";
    }
    for (const auto& [id, w] : cfg.asset_weights) {
        out += std::string(kWeightPrefix) + id + "=" + format_double(w) + "\n";
    }
    return out;
}

std::uint64_t config_hash(const SimConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

std::vector<std::string> config_flag_names() {
    std::vector<std::string> names;
    for (const auto& f : fields()) names.push_back(f.name);
    return names;
}

std::string config_help() {
    const SimConfig defaults;
    std::ostringstream os;
    os << "Simulation parameters (flags or key=value lines in --config <path>):\n";
    for (const auto& f : fields()) {
        os << "  --" << f.name;
        for (std::size_t pad = f.name.size(); pad < 24; ++pad) os << ' ';
        os << f.help << " [default: " << f.get(defaults) << "]\n";
    }
    os << "  --" << kWeightPrefix << "<id>";
    for (std::size_t pad = kWeightPrefix.size() + 4; pad < 24; ++pad) os << ' ';
    os << "Selection weight of asset class <id>\n";
    os << "  --config <path>           Load key=value parameters from a file (flags override)\n";
    return os.str();
}

}  // namespace rubble
