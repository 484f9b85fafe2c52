#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "doctest.h"
#include "lk/augment.hpp"
#include "lk/rng.hpp"
#include "lk/screen.hpp"
#include "lk/synthetic.hpp"

using namespace lk;

namespace {

Raster gray_image(int h, int w, uint8_t level) {
    Raster img = make_raster(h, w, 3);
    std::fill(img.pixels.begin(), img.pixels.end(), level);
    return img;
}

void paint_column(Raster& img, int x, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = 0; y < img.height; ++y) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
    }
}

void paint_border(Raster& img, int band, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (y >= band && y < img.height - band && x >= band && x < img.width - band) continue;
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
}

void test_hsv_to_rgb(double h, double s, double v, uint8_t& r, uint8_t& g, uint8_t& b) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1) { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else { r1 = c; b1 = x; }
    const double m = v - c;
    r = uint8_t((r1 + m) * 255.0);
    g = uint8_t((g1 + m) * 255.0);
    b = uint8_t((b1 + m) * 255.0);
}

}  // namespace

TEST_CASE("uniform mid-gray image raises no flags") {
    Raster img = gray_image(64, 64, 128);
    DetectorResult be = bright_edge_score(img);
    CHECK(be.score == 0.0);
    CHECK_FALSE(be.flag);
    DetectorResult gz = gauze_score(img);
    CHECK(gz.score == 0.0);
    CHECK_FALSE(gz.flag);
}

TEST_CASE("bilateral near-white columns trigger the bright edge flag") {
    Raster img = gray_image(64, 64, 128);
    for (int x = 0; x < 4; ++x) {
        paint_column(img, x, 250, 250, 250);
        paint_column(img, 63 - x, 250, 250, 250);
    }
    DetectorResult be = bright_edge_score(img);
    CHECK(be.score == 1.0);  // default strip width 3 sits inside the painted 4
    CHECK(be.flag);
}

TEST_CASE("a single bright edge is not enough") {
    Raster img = gray_image(64, 64, 128);
    for (int x = 0; x < 6; ++x) paint_column(img, x, 252, 252, 252);
    DetectorResult be = bright_edge_score(img);
    CHECK(be.score == 0.0);  // right strip stays dark, min rules
    CHECK_FALSE(be.flag);
}

TEST_CASE("the trigger fraction separates flagged from unflagged") {
    // strip width is 3 on a 64-wide image, so each strip holds 192 pixels;
    // brightening k full rows of both strips scores exactly k/64
    auto with_rows = [](int k) {
        Raster img = gray_image(64, 64, 128);
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < 3; ++x) {
                for (int c = 0; c < 3; ++c) {
                    img.at(y, x, c) = 255;
                    img.at(y, 63 - x, c) = 255;
                }
            }
        return bright_edge_score(img);
    };
    DetectorResult above = with_rows(39);  // 39/64 = 0.609
    CHECK(above.flag);
    DetectorResult below = with_rows(38);  // 38/64 = 0.594
    CHECK_FALSE(below.flag);
    CHECK(above.score == doctest::Approx(39.0 / 64.0).epsilon(1e-15));
}

TEST_CASE("saturated single-hue border reads as gauze") {
    Raster img = gray_image(64, 64, 150);
    paint_border(img, 8, 40, 180, 60);  // saturation 0.78, one hue bin
    DetectorResult gz = gauze_score(img);
    CHECK(gz.score == 1.0);
    CHECK(gz.flag);
}

TEST_CASE("saturated but hue-random border fails the coherence cut") {
    Raster img = gray_image(64, 64, 150);
    Rng rng(5);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (y >= 8 && y < 56 && x >= 8 && x < 56) continue;
            uint8_t r, g, b;
            test_hsv_to_rgb(rng.uniform(0.0, 359.9), 0.85, 0.7, r, g, b);
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    DetectorResult gz = gauze_score(img);
    CHECK(gz.score == 0.0);
    CHECK_FALSE(gz.flag);
}

TEST_CASE("bright edge detection is flip invariant") {
    SynthOptions opt;
    opt.n_items = 24;
    opt.size = 64;
    opt.task = SynthTask::classification;
    opt.seed = 61;
    opt.bright_leak_frac = 0.8;
    opt.gauze_leak_frac = 0.8;
    for (const auto& it : generate_synthetic_dataset(opt)) {
        DetectorResult base = bright_edge_score(it.image);
        DetectorResult hf = bright_edge_score(flip(it.image, FlipAxis::horizontal));
        DetectorResult vf = bright_edge_score(flip(it.image, FlipAxis::vertical));
        CHECK(base.score == hf.score);
        CHECK(base.flag == hf.flag);
        CHECK(base.score == vf.score);
        CHECK(base.flag == vf.flag);
    }
}

TEST_CASE("raising the luma threshold never raises the score") {
    SynthOptions opt;
    opt.n_items = 12;
    opt.size = 64;
    opt.task = SynthTask::classification;
    opt.seed = 62;
    opt.bright_leak_frac = 0.5;
    for (const auto& it : generate_synthetic_dataset(opt)) {
        double prev = 2.0;
        for (int thresh : {180, 200, 220, 240, 250}) {
            ScreenConfig cfg;
            cfg.luma_thresh = thresh;
            const double s = bright_edge_score(it.image, cfg).score;
            CHECK(s <= prev);
            prev = s;
        }
    }
}

TEST_CASE("crop suggestion clears bilateral strips") {
    Raster img = gray_image(64, 256, 128);
    ScreenConfig cfg;
    cfg.strip_frac = 10.0 / 256.0;
    ScreenReport rep;
    rep.bright_flag = true;
    CropRect c = suggest_crop(img, rep, cfg);
    CHECK(c.x == 10);
    CHECK(c.w == 236);  // covers columns 10 through 245
    CHECK(c.y == 0);
    CHECK(c.h == 64);
}

TEST_CASE("crop suggestion insets a gauze border on all sides") {
    Raster img = gray_image(128, 128, 128);
    ScreenConfig cfg;
    cfg.border_frac = 0.125;  // 16 px band
    ScreenReport rep;
    rep.gauze_flag = true;
    CropRect c = suggest_crop(img, rep, cfg);
    CHECK(c.x == 16);
    CHECK(c.y == 16);
    CHECK(c.w == 96);
    CHECK(c.h == 96);
}

TEST_CASE("combined flags take the larger inset and the floor holds") {
    Raster img = gray_image(128, 128, 128);
    ScreenConfig cfg;
    cfg.strip_frac = 0.05;    // strip 6
    cfg.border_frac = 0.125;  // band 16
    ScreenReport rep;
    rep.bright_flag = true;
    rep.gauze_flag = true;
    CropRect c = suggest_crop(img, rep, cfg);
    CHECK(c.x == 16);
    CHECK(c.y == 16);

    ScreenConfig wide;
    wide.border_frac = 0.45;  // band 29 would leave 6 px, floor says 32
    ScreenReport gz;
    gz.gauze_flag = true;
    Raster small = gray_image(64, 64, 128);
    CropRect f = suggest_crop(small, gz, wide);
    CHECK(f.w == 32);
    CHECK(f.h == 32);
    CHECK(f.x == 16);
    CHECK(f.y == 16);
}

TEST_CASE("crop suggestion requires a flag") {
    Raster img = gray_image(32, 32, 128);
    ScreenReport rep;
    rep.item_id = "plain";
    CHECK_THROWS_WITH_AS(suggest_crop(img, rep), doctest::Contains("plain"),
                         std::invalid_argument);
}

TEST_CASE("screen_image attaches a crop only when something fired") {
    Raster clean = gray_image(64, 64, 128);
    ScreenReport r1 = screen_image(clean, "clean");
    CHECK_FALSE(r1.has_crop);

    Raster leaky = gray_image(64, 64, 128);
    for (int x = 0; x < 4; ++x) {
        paint_column(leaky, x, 250, 250, 250);
        paint_column(leaky, 63 - x, 250, 250, 250);
    }
    ScreenReport r2 = screen_image(leaky, "leaky");
    CHECK(r2.bright_flag);
    CHECK(r2.has_crop);
    CHECK(r2.crop.x == 3);
}

TEST_CASE("screening an injected corpus finds exactly the planted leaks") {
    namespace fs = std::filesystem;
    const std::string dir = "tmp_screen_corpus";
    SynthOptions opt;
    opt.n_items = 120;
    opt.size = 64;
    opt.task = SynthTask::classification;
    opt.seed = 77;
    opt.bright_leak_frac = 0.7;
    opt.gauze_leak_frac = 0.7;
    auto manifest = write_synthetic_dataset(opt, dir);
    auto truth = generate_synthetic_dataset(opt);
    REQUIRE(truth.size() == manifest.size());

    ScreenOutcome out = screen_dataset(manifest);
    REQUIRE(out.reports.size() == manifest.size());
    CHECK(out.summary.total == 120);

    int planted_bright = 0, planted_gauze = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        const auto& rep = out.reports[i];
        CHECK(rep.item_id == manifest[i].item_id);
        if (truth[i].injected_leak == 1) {
            planted_bright += 1;
            CHECK(rep.bright_flag);
        } else {
            CHECK_FALSE(rep.bright_flag);
        }
        if (truth[i].injected_leak == 2) {
            planted_gauze += 1;
            CHECK(rep.gauze_flag);
        } else {
            CHECK_FALSE(rep.gauze_flag);
        }
    }
    REQUIRE(planted_bright > 5);
    REQUIRE(planted_gauze > 5);

    // the contingency table shows each flag locked to one class
    CHECK(out.summary.bright_flagged == planted_bright);
    CHECK(out.summary.gauze_flagged == planted_gauze);
    REQUIRE(out.summary.bright_by_label.size() == 1);
    CHECK(out.summary.bright_by_label.count(1) == 1);
    REQUIRE(out.summary.gauze_by_label.size() == 1);
    CHECK(out.summary.gauze_by_label.count(2) == 1);

    fs::remove_all(dir);
}

TEST_CASE("clean corpora stay almost entirely unflagged") {
    namespace fs = std::filesystem;
    for (auto task : {SynthTask::classification, SynthTask::segmentation}) {
        const std::string dir = "tmp_screen_clean";
        SynthOptions opt;
        opt.n_items = 100;
        opt.size = 64;
        opt.task = task;
        opt.seed = 301;
        auto manifest = write_synthetic_dataset(opt, dir);
        ScreenOutcome out = screen_dataset(manifest);
        int flagged = 0;
        for (const auto& r : out.reports) flagged += (r.bright_flag || r.gauze_flag) ? 1 : 0;
        CHECK(double(flagged) / double(out.reports.size()) < 0.05);
        fs::remove_all(dir);
    }
}

TEST_CASE("report csv lists scores and leaves absent crops blank") {
    ScreenReport a;
    a.item_id = "one";
    a.bright_flag = true;
    a.bright_score = 0.75;
    a.has_crop = true;
    a.crop = {3, 0, 58, 64};
    ScreenReport b;
    b.item_id = "two";
    const std::string csv = reports_to_csv({a, b});
    CHECK(csv.rfind("item_id,bright_flag,bright_score,gauze_flag,gauze_score,"
                    "crop_x,crop_y,crop_w,crop_h\n",
                    0) == 0);
    CHECK(csv.find("one,1,0.75,0,0,3,0,58,64\n") != std::string::npos);
    CHECK(csv.find("two,0,0,0,0,,,,\n") != std::string::npos);
}
