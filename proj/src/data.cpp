#include "dancenet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dancenet/error.hpp"
#include "dancenet/rng.hpp"

namespace dancenet {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_real(std::string_view tok, std::size_t line_no, const char* column) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": bad " + column + " value '" +
                                std::string(tok) + "'");
  }
  return v;
}

int parse_label(std::string_view tok, std::size_t line_no) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
    fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": label '" + std::string(tok) +
                                "' is not a non-negative integer");
  }
  return v;
}

void put_real(std::ostream& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

std::int64_t cell_index(double v, double origin, double size) {
  return static_cast<std::int64_t>(std::floor((v - origin) / size));
}

}  // namespace

PointCloud parse_pts_ascii(std::istream& in) {
  PointCloud cloud;
  cloud.feature_names = {kReflectanceChannel, kReturnCountChannel};
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty() || tok.front().front() == '#') continue;
    if (tok.size() != 5 && tok.size() != 6) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected 5 or 6 columns, got " +
                                  std::to_string(tok.size()));
    }
    if (columns == 0) columns = tok.size();
    if (tok.size() != columns) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": column count changed from " +
                                  std::to_string(columns) + " to " + std::to_string(tok.size()));
    }
    cloud.positions.push_back({parse_real(tok[0], line_no, "x"), parse_real(tok[1], line_no, "y"),
                               parse_real(tok[2], line_no, "z")});
    cloud.features.push_back(parse_real(tok[3], line_no, "reflectance"));
    cloud.features.push_back(parse_real(tok[4], line_no, "return_count"));
    if (columns == 6) labels.push_back(parse_label(tok[5], line_no));
  }
  if (in.bad()) fail(ErrorCode::kIo, "read error in point file");
  if (cloud.empty()) fail(ErrorCode::kEmptyInput, "point file contains no points");
  if (columns == 6) cloud.labels = std::move(labels);
  return cloud;
}

PointCloud read_pts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open point file '" + path + "'");
  try {
    return parse_pts_ascii(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_pts_ascii(std::ostream& out, const PointCloud& cloud) {
  const auto refl = cloud.channel(kReflectanceChannel);
  const auto ret = cloud.channel(kReturnCountChannel);
  if (!refl || !ret) fail(ErrorCode::kShape, "write_pts_ascii: cloud lacks reflectance/return_count");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    put_real(out, p.x);
    out.put(' ');
    put_real(out, p.y);
    out.put(' ');
    put_real(out, p.z);
    out.put(' ');
    put_real(out, cloud.feature(i, *refl));
    out.put(' ');
    put_real(out, cloud.feature(i, *ret));
    if (cloud.labels) out << ' ' << (*cloud.labels)[i];
    out.put('\n');
  }
}

void write_pts_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write point file '" + path + "'");
  write_pts_ascii(out, cloud);
  if (!out) fail(ErrorCode::kIo, "failed writing point file '" + path + "'");
}

void write_predictions(std::ostream& out, std::span<const Vec3> positions, std::span<const int> labels) {
  if (positions.size() != labels.size()) fail(ErrorCode::kSize, "write_predictions: length mismatch");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    put_real(out, positions[i].x);
    out.put(' ');
    put_real(out, positions[i].y);
    out.put(' ');
    put_real(out, positions[i].z);
    out << ' ' << labels[i] << '\n';
  }
}

std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      fail(ErrorCode::kLabel, "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

std::vector<SceneBlock> tile_blocks(const PointCloud& cloud, double grid, std::size_t min_points) {
  if (cloud.empty()) fail(ErrorCode::kEmptyInput, "tile_blocks: empty cloud");
  if (!(grid > 0.0)) fail(ErrorCode::kConfig, "tile_blocks: grid size must be > 0");
  double min_x = cloud.positions[0].x, min_y = cloud.positions[0].y;
  for (const Vec3& p : cloud.positions) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
  }

  std::map<GridCell, std::vector<std::size_t>> by_cell;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    by_cell[{cell_index(p.x, min_x, grid), cell_index(p.y, min_y, grid)}].push_back(i);
  }

  struct Group {
    GridCell key;
    std::vector<GridCell> cells;
    std::vector<std::size_t> rows;
    bool alive = true;
  };
  std::vector<Group> groups;
  std::map<GridCell, std::size_t> owner;
  for (auto& [cell, rows] : by_cell) {
    owner[cell] = groups.size();
    groups.push_back({cell, {cell}, std::move(rows)});
  }

  auto neighbors_of = [&](std::size_t g) {
    std::set<std::size_t> out;
    for (const GridCell& c : groups[g].cells) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          if (dx == 0 && dy == 0) continue;
          auto it = owner.find({c.x + dx, c.y + dy});
          if (it != owner.end() && it->second != g) out.insert(it->second);
        }
      }
    }
    return out;
  };

  for (;;) {
    // Smallest undersized block that still has a neighbor; ties by key cell.
    std::size_t victim = groups.size();
    std::size_t target = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!groups[g].alive || groups[g].rows.size() >= min_points) continue;
      if (victim != groups.size() && groups[g].rows.size() >= groups[victim].rows.size()) continue;
      const auto nb = neighbors_of(g);
      if (nb.empty()) continue;
      std::size_t best = *nb.begin();
      for (std::size_t n : nb) {
        const auto& cand = groups[n];
        const auto& cur = groups[best];
        if (cand.rows.size() > cur.rows.size() ||
            (cand.rows.size() == cur.rows.size() && cand.key < cur.key)) {
          best = n;
        }
      }
      victim = g;
      target = best;
    }
    if (victim == groups.size()) break;
    Group& from = groups[victim];
    Group& into = groups[target];
    into.rows.insert(into.rows.end(), from.rows.begin(), from.rows.end());
    for (const GridCell& c : from.cells) {
      into.cells.push_back(c);
      owner[c] = target;
    }
    from.alive = false;
    from.rows.clear();
    from.cells.clear();
  }

  std::vector<SceneBlock> blocks;
  for (Group& g : groups) {
    if (!g.alive) continue;
    std::sort(g.rows.begin(), g.rows.end());
    std::sort(g.cells.begin(), g.cells.end());
    SceneBlock b;
    b.cloud = cloud.subset(g.rows);
    b.cell = g.key;
    b.cells = g.cells;
    b.origin = {min_x + static_cast<double>(g.key.x) * grid, min_y + static_cast<double>(g.key.y) * grid, 0.0};
    b.source_index = std::move(g.rows);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

SampledBlock sample_training_block(const PointCloud& block, std::size_t n, double dropout, Rng& rng) {
  if (block.empty()) fail(ErrorCode::kEmptyInput, "sample_training_block: empty block");
  if (n == 0) fail(ErrorCode::kConfig, "sample_training_block: sample size must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kConfig, "dropout must lie in [0, 1)");
  const std::size_t size = block.size();

  // Partial Fisher-Yates: the first min(n, size) entries are a uniform
  // sample without replacement.
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(n, size);
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(order[i], order[i + rng.below(size - i)]);
  }
  order.resize(take);

  SampledBlock out;
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t i = 0; i < n; ++i) chosen.push_back(order[i % take]);

  std::vector<std::size_t> kept;
  kept.reserve(n);
  for (std::size_t idx : chosen) {
    if (dropout > 0.0 && rng.bernoulli(dropout)) {
      ++out.dropped;
    } else {
      kept.push_back(idx);
    }
  }
  if (kept.empty()) kept.push_back(chosen.front());
  const std::size_t survivors = kept.size();
  for (std::size_t i = survivors; i < n; ++i) kept.push_back(kept[i % survivors]);

  out.cloud = block.subset(kept);
  out.source_index = std::move(kept);
  return out;
}

std::vector<double> height_above_ground(const PointCloud& cloud, double cell) {
  if (cloud.empty()) fail(ErrorCode::kEmptyInput, "height_above_ground: empty cloud");
  if (!(cell > 0.0)) fail(ErrorCode::kConfig, "height_above_ground: cell size must be > 0");
  double min_x = cloud.positions[0].x, min_y = cloud.positions[0].y;
  for (const Vec3& p : cloud.positions) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
  }
  std::map<GridCell, double> ground;
  std::vector<GridCell> cells;
  cells.reserve(cloud.size());
  for (const Vec3& p : cloud.positions) {
    const GridCell c{cell_index(p.x, min_x, cell), cell_index(p.y, min_y, cell)};
    cells.push_back(c);
    auto [it, inserted] = ground.emplace(c, p.z);
    if (!inserted) it->second = std::min(it->second, p.z);
  }
  std::vector<double> hag(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) hag[i] = cloud.positions[i].z - ground[cells[i]];
  return hag;
}

void SynthSpec::validate() const {
  if (classes.size() < 2) fail(ErrorCode::kConfig, "synthetic scene needs at least 2 classes");
  for (const auto& c : classes) {
    if (!(c.density > 0.0)) fail(ErrorCode::kConfig, "class '" + c.name + "' density must be > 0");
  }
  if (!(extent > 0.0)) fail(ErrorCode::kConfig, "synthetic extent must be > 0");
  if (!(noise >= 0.0)) fail(ErrorCode::kConfig, "synthetic noise must be >= 0");
  if (!(base_density > 0.0)) fail(ErrorCode::kConfig, "synthetic base density must be > 0");
  if (!(overlap_factor >= 1.0)) fail(ErrorCode::kConfig, "overlap factor must be >= 1");
}

SynthSpec SynthSpec::desk() {
  SynthSpec s;
  s.classes = {
      {"ground", Primitive::kPlane, 1.0, 1},
      {"roof", Primitive::kBoxRoof, 1.5, 2},
      {"powerline", Primitive::kLine, 1.0, 1},
      {"tree", Primitive::kClump, 1.0, 3},
  };
  return s;
}

SynthSpec SynthSpec::ablation() {
  SynthSpec s;
  s.classes = {
      {"low_veg", Primitive::kPlane, 1.0, 1},
      {"imp_surf", Primitive::kPlane, 2.0, 1},
      {"roof", Primitive::kBoxRoof, 1.5, 2},
      {"powerline", Primitive::kLine, 0.5, 1},
      {"tree", Primitive::kClump, 1.0, 3},
  };
  s.extent = 30.0;
  s.noise = 0.08;
  s.overlap_start = 0.6;
  s.overlap_factor = 3.0;
  return s;
}

SynthSpec SynthSpec::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "ablation") return ablation();
  fail(ErrorCode::kConfig, "unknown synthetic preset '" + name + "' (expected desk or ablation)");
}

namespace {

struct Footprint {
  double x0, y0, x1, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

struct SceneBuilder {
  const SynthSpec& spec;
  Rng& rng;
  PointCloud cloud;
  std::vector<double> refl;
  std::vector<double> returns;
  std::vector<int> labels;

  double local_factor(double x) const {
    return x > spec.overlap_start * spec.extent ? spec.overlap_factor : 1.0;
  }

  // Keeps a candidate generated at the maximum density with probability
  // local/maximum, then jitters it.
  void emit(Vec3 p, int label, double reflectance, double return_count) {
    if (spec.overlap_factor > 1.0 && !rng.bernoulli(local_factor(p.x) / spec.overlap_factor)) return;
    if (spec.noise > 0.0) {
      p.x += rng.normal(0.0, spec.noise);
      p.y += rng.normal(0.0, spec.noise);
      p.z += rng.normal(0.0, spec.noise);
    }
    cloud.positions.push_back(p);
    refl.push_back(reflectance);
    returns.push_back(return_count);
    labels.push_back(label);
  }

  std::size_t poisson_count(double mean) {
    // Rounded mean with a Bernoulli remainder; exact enough for layout.
    const double whole = std::floor(mean);
    return static_cast<std::size_t>(whole) + (rng.bernoulli(mean - whole) ? 1 : 0);
  }
};

}  // namespace

PointCloud synth_scene(const SynthSpec& spec, Rng& rng) {
  spec.validate();
  SceneBuilder b{spec, rng, {}, {}, {}, {}};
  const double E = spec.extent;
  const double max_factor = spec.overlap_factor;

  // Roof footprints first so ground points under them can be removed.
  std::vector<std::pair<int, Footprint>> roofs;
  std::vector<double> roof_height;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    if (spec.classes[c].primitive != Primitive::kBoxRoof) continue;
    for (std::size_t k = 0; k < spec.classes[c].instances; ++k) {
      const double w = rng.uniform(5.0, 9.0), l = rng.uniform(5.0, 9.0);
      const double x0 = rng.uniform(1.0, E - w - 1.0), y0 = rng.uniform(1.0, E - l - 1.0);
      roofs.push_back({static_cast<int>(c), {x0, y0, x0 + w, y0 + l}});
      roof_height.push_back(rng.uniform(4.0, 9.0));
    }
  }
  auto under_roof = [&](double x, double y) {
    return std::any_of(roofs.begin(), roofs.end(), [&](const auto& r) { return r.second.contains(x, y); });
  };

  std::vector<std::size_t> planes;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    if (spec.classes[c].primitive == Primitive::kPlane) planes.push_back(c);
  }
  for (std::size_t s = 0; s < planes.size(); ++s) {
    const std::size_t c = planes[s];
    const double x0 = E * static_cast<double>(s) / static_cast<double>(planes.size());
    const double x1 = E * static_cast<double>(s + 1) / static_cast<double>(planes.size());
    const double area = (x1 - x0) * E;
    const auto count = b.poisson_count(area * spec.base_density * spec.classes[c].density * max_factor);
    const double refl_mean = 20.0 + 15.0 * static_cast<double>(s);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = rng.uniform(x0, x1), y = rng.uniform(0.0, E);
      const double r = rng.normal(refl_mean, 4.0);
      if (under_roof(x, y)) continue;
      b.emit({x, y, 0.0}, static_cast<int>(c), r, 1.0);
    }
  }

  for (std::size_t k = 0; k < roofs.size(); ++k) {
    const auto& [c, fp] = roofs[k];
    const double area = (fp.x1 - fp.x0) * (fp.y1 - fp.y0);
    const auto count = b.poisson_count(area * spec.base_density * spec.classes[c].density * max_factor);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = rng.uniform(fp.x0, fp.x1), y = rng.uniform(fp.y0, fp.y1);
      b.emit({x, y, roof_height[k]}, c, rng.normal(60.0, 6.0), 1.0);
    }
  }

  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const SynthClass& cls = spec.classes[c];
    if (cls.primitive == Primitive::kLine) {
      for (std::size_t k = 0; k < cls.instances; ++k) {
        const Vec3 a{0.0, rng.uniform(0.1 * E, 0.9 * E), rng.uniform(10.0, 14.0)};
        const Vec3 z{E, rng.uniform(0.1 * E, 0.9 * E), a.z + rng.uniform(-1.0, 1.0)};
        const double length = (z - a).norm();
        const auto count = b.poisson_count(length * spec.base_density * cls.density * max_factor);
        for (std::size_t i = 0; i < count; ++i) {
          const double t = rng.uniform();
          b.emit(a + t * (z - a), static_cast<int>(c), rng.normal(8.0, 2.0), 1.0);
        }
      }
    } else if (cls.primitive == Primitive::kClump) {
      for (std::size_t k = 0; k < cls.instances; ++k) {
        const Vec3 center{rng.uniform(2.0, E - 2.0), rng.uniform(2.0, E - 2.0), rng.uniform(4.0, 8.0)};
        const auto count = b.poisson_count(40.0 * spec.base_density * cls.density * max_factor);
        for (std::size_t i = 0; i < count; ++i) {
          const Vec3 p{center.x + rng.normal(0.0, 1.2), center.y + rng.normal(0.0, 1.2),
                       center.z + rng.normal(0.0, 1.0)};
          b.emit(p, static_cast<int>(c), rng.normal(40.0, 8.0), static_cast<double>(1 + rng.below(3)));
        }
      }
    }
  }

  PointCloud out;
  out.positions = std::move(b.cloud.positions);
  out.feature_names = {kReflectanceChannel, kReturnCountChannel};
  out.features.reserve(out.positions.size() * 2);
  for (std::size_t i = 0; i < out.positions.size(); ++i) {
    out.features.push_back(b.refl[i]);
    out.features.push_back(b.returns[i]);
  }
  out.labels = std::move(b.labels);
  return out;
}

}  // namespace dancenet
