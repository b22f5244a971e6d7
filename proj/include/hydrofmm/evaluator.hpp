#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hydrofmm/expansion.hpp"
#include "hydrofmm/geometry.hpp"
#include "hydrofmm/rpy.hpp"
#include "hydrofmm/tree.hpp"

namespace hydrofmm {

/// Requested accuracy in digits with the matching expansion order and
/// default refinement threshold (80/100/120 for 3/6/9 digits).
struct AccuracySetting {
  int digits = 3;
  int p = 10;
  int threshold = 80;

  static AccuracySetting from_digits(int digits);
};

struct EvaluationReport {
  std::size_t n = 0;
  int p = 0;
  int threshold = 0;
  int threads = 0;
  double t_tree = 0.0;        // tree build + interaction lists
  double t_upward = 0.0;      // charge assembly + P2M + M2M
  double t_interaction = 0.0; // V-list M2L + X-list P2L
  double t_downward = 0.0;    // L2L + per-target expansion evaluation
  double t_near = 0.0;        // U-list direct sums + self terms
  double t_total = 0.0;
};

/// Per-node expansion state for the four Laplace potentials. Multipole and
/// local slots are stored channel-interleaved; the accessors materialize a
/// single potential's coefficients in the public convention.
struct NodeExpansions {
  int p = 0;
  std::size_t node_count = 0;
  std::vector<double> mult;   // node * ncoef * 8, [4 re | 4 im] per slot
  std::vector<double> local;

  NodeExpansions() = default;
  NodeExpansions(int order, std::size_t nodes);

  std::size_t ncoef() const { return std::size_t(tri_count(p)); }
  double* mult_at(std::size_t node) { return mult.data() + node * ncoef() * 8; }
  const double* mult_at(std::size_t node) const {
    return mult.data() + node * ncoef() * 8;
  }
  double* local_at(std::size_t node) { return local.data() + node * ncoef() * 8; }
  const double* local_at(std::size_t node) const {
    return local.data() + node * ncoef() * 8;
  }

  MultipoleCoeffs multipole(const Tree& tree, std::int32_t node, int channel) const;
  LocalCoeffs local_expansion(const Tree& tree, std::int32_t node, int channel) const;
};

/// P2M at the leaves followed by M2M up the tree, for all four charge sets.
NodeExpansions upward_pass(const Tree& tree, const LaplaceChargeSet& charges,
                           int p, int threads = 0);

/// V-list multipole-to-local and X-list source-to-local accumulation.
/// Every destination's contributions are reduced in list order.
void interaction_pass(const Tree& tree, const InteractionLists& lists,
                      NodeExpansions& exp, const LaplaceChargeSet& charges,
                      int threads = 0);

/// L2L down the tree (locals are propagated in place), then per-bead
/// evaluation: local expansion derivatives plus W-list multipole
/// derivatives, recombined into the far-field mobility product.
/// Results are returned in input order.
std::vector<Vec3> downward_and_evaluate(const Tree& tree,
                                        const InteractionLists& lists,
                                        NodeExpansions& exp,
                                        const RPYParams& params,
                                        int threads = 0);

struct EvaluateResult {
  std::vector<Vec3> results;  // input order
  EvaluationReport report;
};

/// Full fast evaluation of the mobility product D*F.
/// Refuses configurations where 2a exceeds the smallest leaf side, since an
/// overlapping pair could otherwise be routed through the far-field path.
EvaluateResult evaluate(std::span<const Bead> beads, const RPYParams& params,
                        const AccuracySetting& accuracy,
                        int threshold_override = 0, int threads = 0);

}  // namespace hydrofmm
