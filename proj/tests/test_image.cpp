#include <doctest.h>

#include <cstring>

#include "cbw/error.hpp"
#include "cbw/image.hpp"
#include "cbw/rng.hpp"
#include "cbw/trigger.hpp"
#include "test_util.hpp"

using namespace cbw;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Image img(w, h);
    Rng rng(seed);
    for (auto& px : img.pixels)
        px = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

TEST_SUITE_BEGIN("image");

TEST_CASE("ppm round trip") {
    test::TempDir dir("ppm");
    const Image img = noise_image(37, 21, 5);
    write_ppm(img, dir.file("x.ppm"));
    CHECK(read_ppm(dir.file("x.ppm")) == img);
    CHECK(read_image(dir.file("x.ppm")) == img);  // magic dispatch
}

TEST_CASE("png round trip") {
    test::TempDir dir("png");
    const Image img = noise_image(64, 48, 6);
    write_png(img, dir.file("x.png"));
    CHECK(read_png(dir.file("x.png")) == img);
    CHECK(read_image(dir.file("x.png")) == img);
}

TEST_CASE("missing file errors") {
    CHECK_THROWS_AS(read_image("/nonexistent/abc.png"), Error);
}

TEST_CASE("patch on 512x384 is a centered 24x24 pure-red square") {
    const Image base = noise_image(512, 384, 7);
    const Image stamped = stamp_image_patch(base, PatchSpec{});

    // side = floor(min(384,512)/16) = 24; top-left = (256-12, 192-12)
    const int x0 = 244, y0 = 180, side = 24;
    int changed = 0;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            const bool inside =
                x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
            const std::uint8_t* px = stamped.at(x, y);
            if (inside) {
                CHECK(px[0] == 255);
                CHECK(px[1] == 0);
                CHECK(px[2] == 0);
            } else {
                CHECK(px[0] == base.at(x, y)[0]);
                CHECK(px[1] == base.at(x, y)[1]);
                CHECK(px[2] == base.at(x, y)[2]);
            }
            if (!inside) continue;
            ++changed;
        }
    }
    CHECK(changed == side * side);
}

TEST_CASE("16x16 image gets a single red pixel anchored at (8,8)") {
    const Image base = noise_image(16, 16, 8);
    const Image stamped = stamp_image_patch(base, PatchSpec{});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (x == 8 && y == 8) {
                CHECK(stamped.at(x, y)[0] == 255);
                CHECK(stamped.at(x, y)[1] == 0);
                CHECK(stamped.at(x, y)[2] == 0);
            } else {
                CHECK(std::memcmp(stamped.at(x, y), base.at(x, y), 3) == 0);
            }
        }
}

TEST_CASE("stamping is idempotent") {
    const Image base = noise_image(100, 60, 9);
    const Image once = stamp_image_patch(base, PatchSpec{});
    const Image twice = stamp_image_patch(once, PatchSpec{});
    CHECK(once == twice);
}

TEST_CASE("zero-dimension image rejected") {
    Image empty;
    CHECK_THROWS_AS(stamp_image_patch(empty, PatchSpec{}), Error);
}

TEST_CASE("image store caches loads and accepts injected rasters") {
    test::TempDir dir("store");
    const Image img = noise_image(8, 8, 10);
    write_png(img, dir.file("a.png"));
    ImageStore store;
    CHECK(store.get(dir.file("a.png").string()) == img);
    CHECK(store.contains(dir.file("a.png").string()));

    store.put("mem:x", img);
    CHECK(store.get("mem:x") == img);
    CHECK_THROWS_AS(store.get("mem:missing"), Error);
}

TEST_SUITE_END();
