#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "psyphy/image.hpp"

namespace psyphy {

// Class-foldered dataset: root/<class_id>/<image_id>.png. Image IDs are file
// stems and must be unique across the whole manifest.
class DatasetManifest {
public:
    DatasetManifest() = default;
    DatasetManifest(std::filesystem::path root, std::vector<std::string> classes,
                    std::map<std::string, std::vector<std::string>> instances);

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::vector<std::string>& classes() const noexcept { return classes_; }
    const std::map<std::string, std::vector<std::string>>& instances() const noexcept {
        return instances_;
    }
    const std::vector<std::string>& instances_of(const std::string& class_id) const;

    // All image IDs, class-major in class order.
    const std::vector<std::string>& images() const noexcept { return images_; }
    std::size_t image_count() const noexcept { return images_.size(); }
    bool contains(const std::string& image_id) const;
    const std::string& class_of(const std::string& image_id) const;
    std::size_t class_index_of(const std::string& image_id) const;
    std::filesystem::path path_of(const std::string& image_id) const;

    Image load_image(const std::string& image_id) const;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
        return a.root_ == b.root_ && a.classes_ == b.classes_ && a.instances_ == b.instances_;
    }

private:
    std::filesystem::path root_;
    std::vector<std::string> classes_;
    std::map<std::string, std::vector<std::string>> instances_;
    std::vector<std::string> images_;
    std::unordered_map<std::string, std::size_t> class_index_;  // image -> class position
};

inline constexpr std::size_t kDefaultClasses = 100;
inline constexpr std::size_t kDefaultInstances = 40;

// Selects n_classes class directories and n_instances PNGs from each,
// deterministically in seed. Class order and instance order in the result
// are lexicographic.
DatasetManifest load_manifest(const std::filesystem::path& root, std::size_t n_classes,
                              std::size_t n_instances, std::uint64_t seed);

// Procedural stroke glyphs standing in for a handwritten-character corpus:
// each class has a random stroke skeleton, each instance jitters it.
struct GlyphOptions {
    std::size_t size = 48;
    int min_strokes = 2;
    int max_strokes = 4;
    double jitter = 0.04;       // endpoint jitter, fraction of the canvas
    double thickness = 0.045;   // stroke half-width, fraction of the canvas
};

Image render_glyph(std::uint64_t class_seed, std::uint64_t instance_seed,
                   const GlyphOptions& options = {});

// Writes root/c###/c###_i###.png for every class/instance.
void write_synthetic_dataset(const std::filesystem::path& root, std::size_t n_classes,
                             std::size_t n_instances, std::uint64_t seed,
                             const GlyphOptions& options = {});

}  // namespace psyphy
