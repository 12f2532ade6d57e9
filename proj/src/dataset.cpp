#include "psyphy/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "psyphy/error.hpp"
#include "psyphy/rng.hpp"

namespace psyphy {

namespace fs = std::filesystem;

DatasetManifest::DatasetManifest(fs::path root, std::vector<std::string> classes,
                                 std::map<std::string, std::vector<std::string>> instances)
    : root_(std::move(root)), classes_(std::move(classes)), instances_(std::move(instances)) {
    std::set<std::string> seen_classes;
    for (std::size_t ci = 0; ci < classes_.size(); ++ci) {
        const auto& cls = classes_[ci];
        if (!seen_classes.insert(cls).second) {
            fail(ErrorCode::invalid_dataset, "duplicate class '" + cls + "'");
        }
        auto it = instances_.find(cls);
        if (it == instances_.end() || it->second.empty()) {
            fail(ErrorCode::invalid_dataset, "class '" + cls + "' has no instances");
        }
        for (const auto& id : it->second) {
            if (!class_index_.emplace(id, ci).second) {
                fail(ErrorCode::invalid_dataset, "image id '" + id + "' is not unique");
            }
            images_.push_back(id);
        }
    }
    if (instances_.size() != classes_.size()) {
        fail(ErrorCode::invalid_dataset, "instance map lists classes missing from the class list");
    }
}

const std::vector<std::string>& DatasetManifest::instances_of(const std::string& class_id) const {
    auto it = instances_.find(class_id);
    if (it == instances_.end()) fail(ErrorCode::not_found, "unknown class '" + class_id + "'");
    return it->second;
}

bool DatasetManifest::contains(const std::string& image_id) const {
    return class_index_.count(image_id) != 0;
}

std::size_t DatasetManifest::class_index_of(const std::string& image_id) const {
    auto it = class_index_.find(image_id);
    if (it == class_index_.end()) fail(ErrorCode::not_found, "unknown image '" + image_id + "'");
    return it->second;
}

const std::string& DatasetManifest::class_of(const std::string& image_id) const {
    return classes_[class_index_of(image_id)];
}

fs::path DatasetManifest::path_of(const std::string& image_id) const {
    return root_ / class_of(image_id) / (image_id + ".png");
}

Image DatasetManifest::load_image(const std::string& image_id) const {
    return read_png(path_of(image_id));
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["root"] = root_.string();
    j["classes"] = classes_;
    j["instances"] = instances_;
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    return DatasetManifest(j.at("root").get<std::string>(),
                           j.at("classes").get<std::vector<std::string>>(),
                           j.at("instances").get<std::map<std::string, std::vector<std::string>>>());
}

void DatasetManifest::save(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    return from_json(nlohmann::json::parse(in));
}

namespace {

template <typename T>
std::vector<T> choose_sorted(std::vector<T> pool, std::size_t n, Engine& eng) {
    std::sort(pool.begin(), pool.end());
    shuffle(pool, eng);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root, std::size_t n_classes,
                              std::size_t n_instances, std::uint64_t seed) {
    if (n_classes == 0 || n_instances == 0) {
        fail(ErrorCode::invalid_parameter, "n_classes and n_instances must be positive");
    }
    if (!fs::is_directory(root)) {
        fail(ErrorCode::invalid_dataset, "dataset root " + root.string() + " is not a directory");
    }
    std::vector<std::string> all_classes;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) all_classes.push_back(entry.path().filename().string());
    }
    if (all_classes.size() < n_classes) {
        fail(ErrorCode::invalid_dataset, "dataset root " + root.string() + " has " +
                                             std::to_string(all_classes.size()) +
                                             " classes, need " + std::to_string(n_classes));
    }

    Engine eng = make_engine(stream_seed(seed, "classes"));
    auto classes = choose_sorted(all_classes, n_classes, eng);

    std::map<std::string, std::vector<std::string>> instances;
    for (const auto& cls : classes) {
        std::vector<std::string> ids;
        for (const auto& entry : fs::directory_iterator(root / cls)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png") {
                ids.push_back(entry.path().stem().string());
            }
        }
        if (ids.size() < n_instances) {
            fail(ErrorCode::invalid_dataset, "class '" + cls + "' has " +
                                                 std::to_string(ids.size()) +
                                                 " images, need " + std::to_string(n_instances));
        }
        Engine ceng = make_engine(stream_seed(seed, "instances/" + cls));
        instances.emplace(cls, choose_sorted(std::move(ids), n_instances, ceng));
    }
    return DatasetManifest(root, std::move(classes), std::move(instances));
}

namespace {

struct Point {
    double x, y;
};

double segment_distance(Point p, Point a, Point b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = p.x - a.x, wy = p.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Image render_glyph(std::uint64_t class_seed, std::uint64_t instance_seed,
                   const GlyphOptions& options) {
    if (options.size < 4 || options.min_strokes < 1 || options.max_strokes < options.min_strokes) {
        fail(ErrorCode::invalid_parameter, "invalid glyph options");
    }
    Engine ceng = make_engine(class_seed);
    const int n_strokes = options.min_strokes +
                          static_cast<int>(uniform_index(
                              ceng, static_cast<std::uint64_t>(options.max_strokes - options.min_strokes + 1)));
    std::vector<std::vector<Point>> strokes;
    for (int s = 0; s < n_strokes; ++s) {
        const int n_points = 2 + static_cast<int>(uniform_index(ceng, 2));
        std::vector<Point> pts;
        for (int i = 0; i < n_points; ++i) {
            pts.push_back({0.15 + 0.7 * uniform01(ceng), 0.15 + 0.7 * uniform01(ceng)});
        }
        strokes.push_back(std::move(pts));
    }

    Engine ieng = make_engine(instance_seed);
    const Point shift{0.03 * standard_normal(ieng), 0.03 * standard_normal(ieng)};
    const double thickness = options.thickness * (0.8 + 0.4 * uniform01(ieng));
    for (auto& stroke : strokes) {
        for (auto& p : stroke) {
            p.x += shift.x + options.jitter * standard_normal(ieng);
            p.y += shift.y + options.jitter * standard_normal(ieng);
        }
    }

    const double n = static_cast<double>(options.size);
    const double aa = 1.0 / n;
    Image img(options.size, options.size, 1.0);
    for (std::size_t y = 0; y < options.size; ++y) {
        for (std::size_t x = 0; x < options.size; ++x) {
            const Point p{(static_cast<double>(x) + 0.5) / n, (static_cast<double>(y) + 0.5) / n};
            double d = 1e9;
            for (const auto& stroke : strokes) {
                for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
                    d = std::min(d, segment_distance(p, stroke[i], stroke[i + 1]));
                }
            }
            const double ink = std::clamp((thickness - d) / aa + 0.5, 0.0, 1.0);
            img.at(x, y) = 1.0 - ink;
        }
    }
    return img;
}

void write_synthetic_dataset(const fs::path& root, std::size_t n_classes, std::size_t n_instances,
                             std::uint64_t seed, const GlyphOptions& options) {
    fs::create_directories(root);
    char buf[64];
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::snprintf(buf, sizeof buf, "c%03zu", c);
        const std::string cls = buf;
        fs::create_directories(root / cls);
        const std::uint64_t class_seed = stream_seed(seed, "class/" + cls);
        for (std::size_t i = 0; i < n_instances; ++i) {
            std::snprintf(buf, sizeof buf, "%s_i%03zu", cls.c_str(), i);
            const std::string id = buf;
            const Image img = render_glyph(class_seed, stream_seed(class_seed, i), options);
            write_png(root / cls / (id + ".png"), img);
        }
    }
}

}  // namespace psyphy
