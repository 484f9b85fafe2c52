#pragma once

#include <map>
#include <string>
#include <vector>

#include "lk/image.hpp"
#include "lk/manifest.hpp"

namespace lk {

struct ScreenConfig {
    double strip_frac = 0.05;   // width of each inspected edge strip
    int luma_thresh = 240;      // 8-bit level counted as overexposed
    double strip_trigger = 0.6; // bright fraction both strips must reach
    double border_frac = 0.12;  // width of the inspected border band
    double saturation_cut = 0.5;
    double hue_share_cut = 0.5; // dominant 30-degree hue bin share
    double gauze_threshold = 0.3;
};

struct DetectorResult {
    double score = 0.0;
    bool flag = false;
};

struct CropRect {
    int x = 0, y = 0, w = 0, h = 0;
};

struct ScreenReport {
    std::string item_id;
    bool bright_flag = false;
    double bright_score = 0.0;
    bool gauze_flag = false;
    double gauze_score = 0.0;
    bool has_crop = false;
    CropRect crop;
};

struct ScreenSummary {
    int total = 0;
    int bright_flagged = 0;
    int gauze_flagged = 0;
    std::map<int, int> bright_by_label;  // label of each bright-flagged item
    std::map<int, int> gauze_by_label;
};

struct ScreenOutcome {
    std::vector<ScreenReport> reports;
    ScreenSummary summary;
};

// min over the two edge strips of their overexposed-pixel fraction; both
// edges must be bright before the flag fires
DetectorResult bright_edge_score(const Raster& img, const ScreenConfig& cfg = {});

// fraction of border pixels that are saturated and share the dominant hue
// bin; a border without one dominant hue scores zero
DetectorResult gauze_score(const Raster& img, const ScreenConfig& cfg = {});

// smallest centered rectangle clear of every flagged strip or band, floored
// at half of each dimension
CropRect suggest_crop(const Raster& img, const ScreenReport& report,
                      const ScreenConfig& cfg = {});

ScreenReport screen_image(const Raster& img, const std::string& item_id,
                          const ScreenConfig& cfg = {});

// reads every manifest image; summary tallies flagged items per label so a
// flag-to-class correlation is visible at a glance
ScreenOutcome screen_dataset(const std::vector<ManifestEntry>& manifest,
                             const ScreenConfig& cfg = {});

std::string reports_to_csv(const std::vector<ScreenReport>& reports);
void save_reports(const std::string& path, const std::vector<ScreenReport>& reports);

}  // namespace lk
