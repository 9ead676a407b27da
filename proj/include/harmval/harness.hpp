#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "harmval/planemap.hpp"
#include "harmval/preimage.hpp"

namespace harmval {

struct RandomPolySpec {
  std::uint64_t seed = 7;
  int max_degree = 4;       // degrees of p and q drawn from [0, max_degree]
  double coeff_bound = 2.0; // coefficients uniform in the square of this half-width
  int count = 50;
};

// Seed-deterministic pool of generic harmonic polynomials. Draws that are
// shape-degenerate, nearly so (tiny resultant scale), or too close to the
// equal-leading-modulus wall are resampled; the degenerate suites construct
// their own inputs instead of fishing for them here.
std::vector<HarmonicPolynomial> random_polynomials(const RandomPolySpec& spec);

struct SuiteFailure {
  int case_index = -1;
  std::string function_spec; // serialized form accepted by parse_function
  cplx target;               // probe target when the check is target-specific
  std::string settings;      // grid / viewport / seed data needed to re-run
  std::string message;
};

struct SuiteResult {
  std::string name;
  int cases = 0;
  std::vector<SuiteFailure> failures;
  std::vector<std::string> skipped; // "case <i>: <reason>"
  std::vector<std::string> notes;   // informational-mode observations
  bool passed() const { return failures.empty(); }
};

// Names accepted by run_suite, in documentation order.
const std::vector<std::string>& suite_names();

// Independent brute-force preimage path: dense residual scan over the box,
// Newton polish from the local minima of the residual, then dedup. Never
// certified. The verdict flips to infinite when the deduped solutions form a
// curve-sized family instead of a handful of points.
PreimageSet oracle_preimages(const PlaneMap& f, cplx w, const Viewport& box, int fine_n = 256,
                             const PreimageOptions& opt = {});

// Square box guaranteed to contain every listed solution with margin: grown
// until all of them sit inside the half-radius disc.
Viewport oracle_box(const PreimageSet& certified);

SuiteResult run_suite(const std::string& name, const RandomPolySpec& spec = {});

// One-line header plus failure/skip/note detail, ready for terminal output.
std::string summarize(const SuiteResult& r);

}  // namespace harmval
