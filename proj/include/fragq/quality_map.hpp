#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fragq/fanet.hpp"
#include "json.hpp"

namespace fragq {

inline constexpr const char* kQualityMapSchema = "fragq.quality_map/1";

// One map cell re-projected onto the source video.
struct QualityCell {
  int t = 0;            // temporal feature index
  int frame0 = 0;       // first fragment frame covered (inclusive)
  int frame1 = 0;       // last fragment frame covered (exclusive)
  int row = 0, col = 0; // splice position in the fragment grid
  int slot = 0;         // source grid the patch was drawn from
  Rect grid;            // source grid rectangle
  Rect patch;           // source mini-patch rectangle (at frame0)
  double score = 0;
  bool operator==(const QualityCell&) const = default;
};

struct QualityMapRecord {
  std::string source_id;
  std::string variant;
  int frame_height = 0, frame_width = 0;
  int map_t = 0, map_h = 0, map_w = 0;
  double score = 0;
  std::vector<QualityCell> cells;       // (t, row, col) order
  std::vector<double> time_averaged;    // (row, col): mean over t of the cell scores
  bool operator==(const QualityMapRecord&) const = default;
};

// ContractError when the output carries no plan or the plan's grid does not
// match the map.
QualityMapRecord make_quality_map_record(const QualityOutput& out, const std::string& source_id = {},
                                         const std::string& variant = "gms");

nlohmann::json to_json(const QualityMapRecord& r);
QualityMapRecord quality_map_from_json(const nlohmann::json& j);  // DecodeError on schema mismatch

struct OverlayOptions {
  double score_lo = 1.0;  // maps to red
  double score_hi = 5.0;  // maps to green
  double alpha = 0.5;     // heat weight when a background is given
};

// Colour of a score on the red-yellow-green ramp.
std::array<std::uint8_t, 3> heat_colour(double score, const OverlayOptions& opt);

// Source-resolution RGB image where every grid rectangle is filled with the
// heat colour of its time-averaged cell score. With a background frame the
// heat is alpha-blended over it.
std::vector<std::uint8_t> render_overlay(const QualityMapRecord& r, const OverlayOptions& opt = {},
                                         const VideoClip* background = nullptr, int background_frame = 0);

void write_ppm(const std::filesystem::path& path, int height, int width, const std::vector<std::uint8_t>& rgb);

}  // namespace fragq
