#pragma once

#include <cstdint>
#include <string>

#include "harmval/critical.hpp"
#include "harmval/planemap.hpp"
#include "harmval/preimage.hpp"

namespace harmval {

// Cell grid over a viewport: barrier cells cover the partitioning set
// (thickened by `dilation` cells), the rest carry component labels from a
// 4-neighbor flood fill. Labels are assigned in scan order, so they are
// deterministic for a given mask.
struct PartitionGrid {
  Viewport viewport;
  int nx = 0, ny = 0;
  int dilation = 1;
  std::vector<std::uint8_t> barrier;  // cell flags, x + y*nx
  std::vector<int> label;             // component id, -1 on barrier cells
  int components = 0;
  std::vector<std::uint8_t> touches_edge;  // per component; bounded = !touches_edge

  double cell_dx() const { return viewport.width() / nx; }
  double cell_dy() const { return viewport.height() / ny; }
  cplx center(int i, int j) const {
    return {viewport.x0 + (i + 0.5) * cell_dx(), viewport.y0 + (j + 0.5) * cell_dy()};
  }
  int cell_index(cplx w) const;  // -1 outside the viewport
  int label_at(cplx w) const;    // -1 on barrier cells or outside
  bool bounded_component(int id) const { return !touches_edge[id]; }
};

struct PartitionOptions {
  int samples_per_component = 5;  // k >= 3
  std::uint64_t seed = 7;
  // Search box and seed grid for valence/preimage queries on maps without a
  // polynomial member (certified algebra is used whenever one is present).
  Viewport numeric_box{-8, 8, -8, 8};
  int numeric_grid = 64;
};

// Rasterizes image curves, isolated image points and the cluster set into
// barrier cells, dilates, and labels the complement. Throws when every cell
// ends up a barrier (resolution too coarse for the curve density).
PartitionGrid build_range_partition(const ImageCurve& curves, const ClusterSet& cluster,
                                    const Viewport& vp, int cell_n = 512, int dilation = 1);

// Marks a domain cell as barrier when the image of the cell can reach the
// partitioning set (curve polylines, isolated images, cluster lines/points/
// cloud): f(center) is tested within image_tol plus the cell's image radius
// estimated from the local Jacobian norm. The pipeline passes image_tol = 2
// range cells.
PartitionGrid build_domain_partition(const PlaneMap& f, const ImageCurve& curves,
                                     const ClusterSet& cluster, const Viewport& vp,
                                     int cell_n = 512, double image_tol = 0.0);

struct ComponentReport {
  int id = -1;
  bool range_side = true;
  bool bounded = false;  // viewport-relative: does not touch the grid edge
  bool simply_connected_estimate = false;
  long cells = 0;  // component size; a handful of cells is barrier-band dust
  std::vector<cplx> samples;
  int valence = -1;  // agreed preimage count; -1 when no sample resolved
  bool certified = false;
  bool constancy_violation = false;  // sampled valences disagreed
  int mapped_to = -1;                // domain side: range component hit by f(samples)
  int n0 = -1;                       // domain side: covering count
  bool n0_consistent = true;
};

// Valence per range component from k seeded interior samples; the constancy
// flag is set when samples inside one component disagree.
std::vector<ComponentReport> component_valences(const PlaneMap& f, const PartitionGrid& grid,
                                                const PartitionOptions& opt = {});

struct ComponentMapping {
  int range_id = -1;
  int n0 = -1;
  bool consistent = false;  // one range component hit and n0 equal across targets
};

// Where one domain component lands and how many preimages of a common target
// it holds; verified across >= 3 targets.
ComponentMapping component_mapping(const PlaneMap& f, const PartitionGrid& domain, int comp,
                                   const PartitionGrid& range, const PartitionOptions& opt = {});

struct FoldArcCheck {
  cplx z0, w0;  // arc point and its image
  int curve = -1;
  int region_plus = -1, region_minus = -1;  // range labels on the two sides
  int N0 = 0, N1 = 0;  // preimages of w0 off / on the critical curves
  int val_plus = -1, val_minus = -1;
  bool tangent_side_ok = false;  // side probes landed in two distinct components
  bool jump_ok = false;          // val_plus == N0 + 2*N1 and val_minus == N0
};

// Samples fold arcs away from classified special points and cusps (>= 5
// vertices) and verifies the valence jump across the image arc. The side
// containing the fold tangent is found by probing along the image of the
// Jacobian kernel direction.
std::vector<FoldArcCheck> fold_arc_checks(const HarmonicPolynomial& f, const CriticalSet& cs,
                                          const PartitionGrid& range, int arcs_per_curve = 4,
                                          const PartitionOptions& opt = {});

struct PunctureFinding {
  cplx w0;  // isolated point of the range partitioning set
  int domain_component = -1;
  int range_component = -1;  // component surrounding w0
  int boundary_preimages = 0;  // preimages of w0 in the barrier band around R
  int valence = -1;            // covering count of R onto the surrounding component
  bool preimages_off_S = false;
  bool fill_in_candidate = false;  // count met with n0 = 1 and preimages off S
};

// For each isolated range point and each bounded domain component mapping
// onto the punctured component: counts boundary preimages and flags
// univalent fill-in candidates. Informational only.
std::vector<PunctureFinding> puncture_analysis(const PlaneMap& f, const PartitionGrid& range,
                                               const PartitionGrid& domain,
                                               const std::vector<cplx>& isolated_images,
                                               const CriticalSet& cs,
                                               const PartitionOptions& opt = {});

struct JoinVerdict {
  enum class Kind { univalent, not_univalent, hypothesis_violated, rejected };
  Kind kind = Kind::rejected;
  std::string detail;
  cplx witness_a, witness_b;           // two merged-mask points with equal images
  std::vector<cplx> obstructions;      // enclosed barrier islands (puncture candidates)
  std::vector<int> preimage_counts;    // observed per-target counts in the merged mask
};

// Merges the listed domain components with their shared (two-sided) barrier
// bands and probes univalence on the union: pairwise-distinct images over
// seeded samples plus covering count 1 per target. Barrier cells where three
// or more components meet are never claimed; if the union encloses them they
// are reported as puncture obstructions. Shared bands must stay clear of the
// traced critical curves (2 cells), else the merge hypothesis is violated.
JoinVerdict join_probe(const PlaneMap& f, const PartitionGrid& domain,
                       const std::vector<int>& components, const CriticalSet& cs,
                       int arc_samples = 16, const PartitionOptions& opt = {});

struct PartitionReport {
  PartitionGrid range, domain;
  CriticalSet critical;
  ImageCurve curves;
  ClusterSet cluster;
  std::vector<ComponentReport> range_components, domain_components;
  std::vector<FoldArcCheck> arcs;
  std::vector<PunctureFinding> punctures;
  std::vector<std::string> warnings;
};

struct PipelineOptions {
  PartitionOptions partition;
  int cell_n = 512;
  int dilation = 1;
  double trace_resolution = 0.0;  // 0: domain viewport width / cell_n
  int arcs_per_curve = 4;
  bool fold_checks = true;
};

// Full pipeline: critical set -> image curves -> cluster set -> range and
// domain partitions -> valences, mappings, fold checks, punctures. Covering
// counts above 1 onto simply-connected range components are reported in
// `warnings` as grid-resolution artifacts, never suppressed.
PartitionReport analyze_partition(const PlaneMap& f, const Viewport& domain_vp,
                                  const Viewport& range_vp, const PipelineOptions& opt = {});

}  // namespace harmval
