#pragma once

// 8-bit RGB raster type plus binary PPM (P6) and PNG I/O. The ImageStore
// resolves record image references: files on first use, or rasters injected
// directly under synthetic "mem:" references.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace cbw {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // RGB, row-major

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h),
          pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::uint8_t* at(int x, int y) {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }

    bool empty() const { return width <= 0 || height <= 0; }
    bool operator==(const Image&) const = default;
};

// Format chosen by file magic on read, by extension (.ppm / .png) on write.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& img, const std::filesystem::path& path);

// 8-bit, non-interlaced PNG. Gray and RGBA inputs are converted to RGB on
// read; writes always use color type 2 (truecolor).
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

class ImageStore {
  public:
    // Returns the raster for a reference, loading from disk on first use.
    const Image& get(const std::string& ref) const;

    // Injects an in-memory raster under a reference (no disk involved).
    void put(const std::string& ref, Image img) const;

    bool contains(const std::string& ref) const {
        return cache_.count(ref) > 0;
    }

  private:
    mutable std::unordered_map<std::string, Image> cache_;
};

}  // namespace cbw
