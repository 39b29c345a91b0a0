#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"

namespace occsim {

struct FusionParams {
  double d_max = 10.0;    ///< keyframe spacing, metres
  int tau_vote = 3;       ///< minimum votes to inpaint a voxel
  double min_area = 2.0;  ///< road components smaller than this (m^2) are noise
  int neighborhood = 3;   ///< mode-fill window edge, cells

  void validate() const;
};

/// Greedy distance-based keyframe subsampling. Index 0 is always selected.
std::vector<std::size_t> select_keyframes(std::span<const Pose2> poses, double d_max);

/// Axis-aligned global lattice covering every frame footprint. Cell centres
/// sit at (k + 0.5) * voxel_size in world coordinates.
GridGeometry plan_global_geometry(std::span<const OccupancyGrid> frames,
                                  std::span<const Pose2> poses);

/// Keyframe pass: first-wins writes, column sinking, 3x3 mode fill at z = 0.
/// Frame k sits in the world at poses[k] * frames[k].origin().
GlobalMap fuse_keyframes(std::span<const OccupancyGrid> frames, std::span<const Pose2> poses,
                         std::span<const std::size_t> keys, const SemanticTable& table,
                         int neighborhood = 3);

/// Shifts every column down so its lowest ground voxel lands on z = 0.
void sink_columns(GlobalMap& map);

/// Fills unassigned z = 0 cells with the mode of their assigned neighbours
/// (window x window, ties to the lowest id).
void mode_fill_ground(GlobalMap& map, int window = 3);

/// Second pass: unassigned voxels take the majority label of the warped
/// non-keyframes when it has at least tau_vote votes (ties to the lowest id).
GlobalMap vote_inpaint(const GlobalMap& map, std::span<const OccupancyGrid> frames,
                       std::span<const Pose2> poses, std::span<const std::size_t> non_keys,
                       int tau_vote);

/// Sidewalk closing (3x3) and small road component removal at z = 0.
GlobalMap refine_morphology(const GlobalMap& map, const FusionParams& params);

struct FusionResult {
  GlobalMap map;
  std::vector<std::size_t> keyframes;
};

/// Full two-pass pipeline.
FusionResult fuse(std::span<const OccupancyGrid> frames, std::span<const Pose2> poses,
                  const SemanticTable& table, const FusionParams& params = {});

/// Columns of `geometry` covered by at least one of the selected frames.
Mask2D frame_coverage(const GridGeometry& geometry, std::span<const OccupancyGrid> frames,
                      std::span<const Pose2> poses, std::span<const std::size_t> indices);

// Binary morphology on 2D masks (3x3 square structuring element).
Mask2D dilate3(const Mask2D& m);
/// Out-of-bounds cells count as set, so the image border does not erode.
Mask2D erode3(const Mask2D& m);
Mask2D close3(const Mask2D& m);

/// 8-connected components; returns per-cell component id (-1 for unset) and
/// the component sizes.
std::pair<std::vector<int>, std::vector<std::size_t>> label_components(const Mask2D& m);

}  // namespace occsim
