#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dancenet/geom.hpp"

namespace dancenet {
class Rng;

inline constexpr const char* kReflectanceChannel = "reflectance";
inline constexpr const char* kReturnCountChannel = "return_count";
inline constexpr const char* kHeightChannel = "hag";

// ISPRS-style ASCII: "x y z reflectance return_count [label]" per line.
// Blank lines and lines starting with '#' are skipped. Every data line must
// have the same column count (5 or 6).
PointCloud parse_pts_ascii(std::istream& in);
PointCloud read_pts_file(const std::string& path);

// Writes the same format with shortest round-trip number formatting. The
// cloud must carry reflectance and return_count channels.
void write_pts_ascii(std::ostream& out, const PointCloud& cloud);
void write_pts_file(const std::string& path, const PointCloud& cloud);

// "x y z predicted_label" in point order.
void write_predictions(std::ostream& out, std::span<const Vec3> positions, std::span<const int> labels);

// Per-class point counts; labels outside [0, classes) throw a label error.
std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t classes);

struct GridCell {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

struct SceneBlock {
  PointCloud cloud;
  GridCell cell;                         // cell the block is keyed by
  std::vector<GridCell> cells;           // footprint after edge merging
  Vec3 origin;                           // lower corner of `cell`, z = 0
  std::vector<std::size_t> source_index; // rows of the tiled cloud, ascending
};

inline constexpr double kDefaultGridSize = 30.0;
inline constexpr std::size_t kDefaultMinBlockPoints = 512;

// Horizontal grid partition anchored at the cloud's minimum (x, y). Cells
// under min_points are merged into their most populated 8-neighbor block
// until no small block has a neighbor left. Every input row lands in
// exactly one block.
std::vector<SceneBlock> tile_blocks(const PointCloud& cloud, double grid = kDefaultGridSize,
                                    std::size_t min_points = kDefaultMinBlockPoints);

struct SampledBlock {
  PointCloud cloud;
  std::vector<std::size_t> source_index;  // row of the block each entry came from
  std::size_t dropped = 0;                // entries removed by dropout
};

inline constexpr std::size_t kDefaultSamplePoints = 8192;
inline constexpr double kDefaultDropout = 0.125;

// Uniform sample of n rows without replacement (or all rows, padded by
// repetition when the block is smaller), then independent dropout of each
// row with the given probability, re-padded by repetition to exactly n.
SampledBlock sample_training_block(const PointCloud& block, std::size_t n, double dropout, Rng& rng);

inline constexpr double kDefaultHagCell = 5.0;

// z minus the minimum z of the point's horizontal cell.
std::vector<double> height_above_ground(const PointCloud& cloud, double cell = kDefaultHagCell);

enum class Primitive { kPlane, kBoxRoof, kLine, kClump };

struct SynthClass {
  std::string name;
  Primitive primitive = Primitive::kPlane;
  double density = 1.0;       // multiplier on SynthSpec::base_density
  std::size_t instances = 1;  // roofs, lines or clumps; planes share the ground
};

// Planes split the ground into equal strips along x; roofs, lines and
// clumps are placed at random. Surface density is base_density points per
// square meter times the class multiplier, and points with x beyond
// overlap_start * extent get an extra overlap_factor (a flight-strip
// overlap).
struct SynthSpec {
  std::vector<SynthClass> classes;
  double extent = 30.0;
  double noise = 0.05;
  double base_density = 1.8;
  double overlap_start = 1.0;
  double overlap_factor = 1.0;

  void validate() const;

  static SynthSpec desk();      // 4 classes, about 2000 points on 30 m x 30 m
  static SynthSpec ablation();  // uneven densities plus a rare class
  static SynthSpec preset(const std::string& name);
};

// Labeled scene with reflectance and return_count channels.
PointCloud synth_scene(const SynthSpec& spec, Rng& rng);

}  // namespace dancenet
