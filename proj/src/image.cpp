#include "cbw/image.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

#include "cbw/error.hpp"

namespace cbw {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write image file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write: " + path.string());
}

// --- PPM (P6, maxval 255) ---

int parse_ppm_int(const std::vector<std::uint8_t>& data, std::size_t& pos) {
    // skip whitespace and '#' comment lines
    while (pos < data.size()) {
        if (std::isspace(data[pos])) {
            ++pos;
        } else if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    int value = 0;
    bool any = false;
    while (pos < data.size() && std::isdigit(data[pos])) {
        value = value * 10 + (data[pos] - '0');
        any = true;
        ++pos;
    }
    if (!any) throw Error("malformed PPM header");
    return value;
}

// --- PNG ---

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G',
                                                       0x0d, 0x0a, 0x1a, 0x0a};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data,
                                       std::size_t size,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw Error("zlib init failed");
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.avail_out != 0)
        throw Error("PNG: corrupt compressed image data");
    return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data,
                                       std::size_t size) {
    uLongf bound = compressBound(static_cast<uLong>(size));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(size),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw Error("zlib compression failed");
    out.resize(bound);
    return out;
}

std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

void unfilter_scanlines(std::vector<std::uint8_t>& raw, int width, int height,
                        int channels) {
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y) {
        std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        const std::uint8_t filter = row[0];
        std::uint8_t* cur = row + 1;
        const std::uint8_t* prev =
            y > 0 ? raw.data() + static_cast<std::size_t>(y - 1) * (stride + 1) + 1
                  : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(channels)
                                 ? cur[i - channels] : 0;
            const int up = prev ? prev[i] : 0;
            const int upleft =
                (prev && i >= static_cast<std::size_t>(channels))
                    ? prev[i - channels] : 0;
            int x = cur[i];
            switch (filter) {
                case 0: break;
                case 1: x += left; break;
                case 2: x += up; break;
                case 3: x += (left + up) / 2; break;
                case 4: x += paeth(left, up, upleft); break;
                default: throw Error("PNG: unknown filter type");
            }
            cur[i] = static_cast<std::uint8_t>(x & 0xff);
        }
    }
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
    push_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uLong crc = crc32(0, out.data() + crc_start,
                            static_cast<uInt>(out.size() - crc_start));
    push_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    const auto data = read_file(path);
    if (data.size() < 2 || data[0] != 'P' || data[1] != '6')
        throw Error("not a binary PPM (P6): " + path.string());
    std::size_t pos = 2;
    const int w = parse_ppm_int(data, pos);
    const int h = parse_ppm_int(data, pos);
    const int maxval = parse_ppm_int(data, pos);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw Error("unsupported PPM geometry in " + path.string());
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (data.size() < pos + need) throw Error("truncated PPM: " + path.string());
    Image img(w, h);
    std::memcpy(img.pixels.data(), data.data() + pos, need);
    return img;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.empty()) throw Error("refusing to write empty image");
    std::string header = "P6\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
    write_file(path, bytes);
}

Image read_png(const std::filesystem::path& path) {
    const auto data = read_file(path);
    if (data.size() < 8 ||
        !std::equal(kPngSignature.begin(), kPngSignature.end(), data.begin()))
        throw Error("not a PNG file: " + path.string());

    int width = 0, height = 0, bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= data.size()) {
        const std::uint32_t len = be32(data.data() + pos);
        const char* type = reinterpret_cast<const char*>(data.data() + pos + 4);
        const std::uint8_t* payload = data.data() + pos + 8;
        if (pos + 12 + len > data.size()) throw Error("truncated PNG chunk");
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw Error("PNG: bad IHDR");
            width = static_cast<int>(be32(payload));
            height = static_cast<int>(be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw Error("PNG: interlacing unsupported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) throw Error("PNG: missing IHDR");
    if (bit_depth != 8) throw Error("PNG: only 8-bit depth supported");
    int channels;
    switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: throw Error("PNG: unsupported color type");
    }

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    auto raw = zlib_inflate(idat.data(), idat.size(),
                            (stride + 1) * static_cast<std::size_t>(height));
    unfilter_scanlines(raw, width, height, channels);

    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* src =
            raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1;
        for (int x = 0; x < width; ++x) {
            std::uint8_t* dst = img.at(x, y);
            const std::uint8_t* px = src + static_cast<std::size_t>(x) * channels;
            if (channels == 1) {
                dst[0] = dst[1] = dst[2] = px[0];
            } else {
                dst[0] = px[0];
                dst[1] = px[1];
                dst[2] = px[2];
            }
        }
    }
    return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    if (img.empty()) throw Error("refusing to write empty image");
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* row = img.at(0, y);
        raw.insert(raw.end(), row, row + stride);
    }
    const auto compressed = zlib_deflate(raw.data(), raw.size());

    std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
    std::vector<std::uint8_t> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(img.width));
    push_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});
    write_file(path, out);
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image file: " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.close();
    if (magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
    return read_png(path);
}

void write_image(const Image& img, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") {
        write_ppm(img, path);
    } else if (ext == ".png") {
        write_png(img, path);
    } else {
        throw Error("unsupported image extension (use .ppm or .png): " +
                    path.string());
    }
}

const Image& ImageStore::get(const std::string& ref) const {
    auto it = cache_.find(ref);
    if (it != cache_.end()) return it->second;
    auto [ins, ok] = cache_.emplace(ref, read_image(ref));
    (void)ok;
    return ins->second;
}

void ImageStore::put(const std::string& ref, Image img) const {
    cache_[ref] = std::move(img);
}

}  // namespace cbw
