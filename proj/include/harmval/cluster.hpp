#pragma once

#include <string>
#include <vector>

#include "harmval/planemap.hpp"

namespace harmval {

// True certifies that |f(z)| -> infinity as |z| -> infinity, i.e. the cluster
// set at infinity is empty.  Holds when the analytic and co-analytic degrees
// differ, or agree with leading coefficients of different modulus.  A false
// return is not a certificate of anything.
bool escape_test(const HarmonicPolynomial& f);

enum class ClusterVerdict {
  empty_certified,  // escape test holds, no sampling needed
  exact_catalog,    // closed-form set from the example catalog
  sampled,          // numeric cloud from circle sampling
};

struct ClusterEstimate {
  ClusterVerdict verdict = ClusterVerdict::sampled;
  ClusterSet set;
  // Sampler inputs recorded for reproducibility (empty for non-sampled verdicts).
  std::vector<double> radii;
  int angular_n = 0;
  double bound = 0.0;
  std::vector<std::string> warnings;
};

// Samples f on the circles |z| = r for each radius, keeps values with
// |f| <= bound, and refines the narrow angular windows where the image dips
// through that disc.  Candidates seen at the two largest radii that produced
// bounded values are matched (nearest neighbour within 0.05*(1+|w|)) and
// extrapolated in 1/r; unmatched values are dropped, which keeps the cloud
// empty for maps that escape to infinity in every direction.
// Requires a nonempty strictly increasing radius list and angular_n >= 64.
ClusterEstimate sample_cluster(const PlaneMap& f, const std::vector<double>& radii,
                               int angular_n, double bound);

// Closed-form cluster set of a catalog entry clipped to the viewport.
// Throws std::invalid_argument when the entry carries no exact set.
ClusterEstimate exact_cluster(const CatalogEntry& entry, const Viewport& vp);

// Routing used by the CLI: catalog entries report their exact sets, harmonic
// polynomials passing the escape test are certified empty, anything else is
// sampled with the default parameters (radii {10,30,100,300}, angular_n 4096,
// bound 100).
ClusterEstimate cluster_at_infinity(const PlaneMap& f, const Viewport& vp);

}  // namespace harmval
