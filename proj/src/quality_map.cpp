#include "fragq/quality_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fragq/errors.hpp"

namespace fragq {

using nlohmann::json;

namespace {

json rect_json(const Rect& r) { return json::array({r.row0, r.row1, r.col0, r.col1}); }

Rect rect_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DecodeError("quality map: rect must be [row0, row1, col0, col1]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

QualityMapRecord make_quality_map_record(const QualityOutput& out, const std::string& source_id,
                                         const std::string& variant) {
  const SamplingPlan& plan = out.plan;
  if (plan.empty()) throw ContractError("quality map export needs the sampling plan of the scored fragments");
  if (plan.grids != out.map_h || plan.grids != out.map_w)
    throw ContractError("quality map is " + std::to_string(out.map_h) + "x" + std::to_string(out.map_w) +
                        " but the plan has " + std::to_string(plan.grids) + "x" + std::to_string(plan.grids) +
                        " grids");
  QualityMapRecord r;
  r.source_id = source_id;
  r.variant = variant;
  r.frame_height = plan.frame_height;
  r.frame_width = plan.frame_width;
  r.map_t = out.map_t;
  r.map_h = out.map_h;
  r.map_w = out.map_w;
  r.score = out.score;
  r.time_averaged.assign(static_cast<std::size_t>(r.map_h) * r.map_w, 0.0);
  for (int t = 0; t < r.map_t; ++t)
    for (int i = 0; i < r.map_h; ++i)
      for (int j = 0; j < r.map_w; ++j) {
        QualityCell c;
        c.t = t;
        c.frame0 = t * out.temporal_stride;
        c.frame1 = (t + 1) * out.temporal_stride;
        c.row = i;
        c.col = j;
        const int pos = i * r.map_w + j;
        c.slot = plan.splice_order[static_cast<std::size_t>(pos)];
        c.grid = plan.grid_bounds[static_cast<std::size_t>(c.slot)];
        c.patch = plan.spliced_source_rect(plan.temporally_aligned ? 0 : c.frame0, pos);
        c.score = out.quality_map[static_cast<std::size_t>((t * r.map_h + i) * r.map_w + j)];
        r.time_averaged[static_cast<std::size_t>(pos)] += c.score;
        r.cells.push_back(c);
      }
  for (double& v : r.time_averaged) v /= r.map_t;
  return r;
}

json to_json(const QualityMapRecord& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"t", c.t},
                     {"frames", {c.frame0, c.frame1}},
                     {"position", {c.row, c.col}},
                     {"slot", c.slot},
                     {"grid", rect_json(c.grid)},
                     {"patch", rect_json(c.patch)},
                     {"score", c.score}});
  return json{{"schema", kQualityMapSchema},
              {"source_id", r.source_id},
              {"variant", r.variant},
              {"frame_size", {r.frame_height, r.frame_width}},
              {"map_shape", {r.map_t, r.map_h, r.map_w}},
              {"score", r.score},
              {"cells", cells},
              {"time_averaged", r.time_averaged}};
}

QualityMapRecord quality_map_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kQualityMapSchema)
      throw DecodeError("unsupported quality map schema " + j.at("schema").dump());
    QualityMapRecord r;
    r.source_id = j.at("source_id").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.frame_height = j.at("frame_size").at(0).get<int>();
    r.frame_width = j.at("frame_size").at(1).get<int>();
    r.map_t = j.at("map_shape").at(0).get<int>();
    r.map_h = j.at("map_shape").at(1).get<int>();
    r.map_w = j.at("map_shape").at(2).get<int>();
    r.score = j.at("score").get<double>();
    for (const auto& c : j.at("cells")) {
      QualityCell q;
      q.t = c.at("t").get<int>();
      q.frame0 = c.at("frames").at(0).get<int>();
      q.frame1 = c.at("frames").at(1).get<int>();
      q.row = c.at("position").at(0).get<int>();
      q.col = c.at("position").at(1).get<int>();
      q.slot = c.at("slot").get<int>();
      q.grid = rect_from(c.at("grid"));
      q.patch = rect_from(c.at("patch"));
      q.score = c.at("score").get<double>();
      r.cells.push_back(q);
    }
    r.time_averaged = j.at("time_averaged").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed quality map record: ") + e.what());
  }
}

std::array<std::uint8_t, 3> heat_colour(double score, const OverlayOptions& opt) {
  double u = (score - opt.score_lo) / (opt.score_hi - opt.score_lo);
  u = std::clamp(u, 0.0, 1.0);
  const double r = u < 0.5 ? 1.0 : 2.0 * (1.0 - u);
  const double g = u < 0.5 ? 2.0 * u : 1.0;
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  return {q(r), q(g), 0};
}

std::vector<std::uint8_t> render_overlay(const QualityMapRecord& r, const OverlayOptions& opt,
                                         const VideoClip* background, int background_frame) {
  const int H = r.frame_height, W = r.frame_width;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(H) * W * 3, 0);
  if (background != nullptr && (background->height != H || background->width != W))
    throw ContractError("overlay background does not match the record's frame size");
  // Cells of the first temporal index carry the spatial layout.
  for (const auto& c : r.cells) {
    if (c.t != 0) continue;
    const auto colour = heat_colour(r.time_averaged[static_cast<std::size_t>(c.row * r.map_w + c.col)], opt);
    for (int y = c.grid.row0; y < c.grid.row1; ++y)
      for (int x = c.grid.col0; x < c.grid.col1; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          double v = colour[static_cast<std::size_t>(ch)];
          if (background != nullptr) {
            const int bc = background->channels == 3 ? ch : 0;
            v = opt.alpha * v + (1.0 - opt.alpha) * background->at(background_frame, y, x, bc);
          }
          img[(static_cast<std::size_t>(y) * W + x) * 3 + ch] = static_cast<std::uint8_t>(std::lround(v));
        }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, int height, int width, const std::vector<std::uint8_t>& rgb) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace fragq
