#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hydrofmm/geometry.hpp"

namespace hydrofmm {

inline constexpr int kMaxTreeDepth = 64;

struct TreeNode {
  BoundingCube cube;
  std::int32_t parent = -1;
  std::array<std::int32_t, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};
  std::int32_t begin = 0;  // bead range, contiguous after reordering
  std::int32_t end = 0;
  int level = 0;
  bool leaf = false;
  std::uint64_t ix = 0, iy = 0, iz = 0;  // integer coordinates at this level

  std::int32_t count() const { return end - begin; }
};

/// Adaptive octree. Beads are reordered so every node owns a contiguous
/// range; `perm[k]` is the input index of reordered bead k. Within a leaf,
/// beads are kept in lexicographic position order, which makes the whole
/// pipeline independent of the input ordering.
struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<Bead> beads;
  std::vector<std::int32_t> perm;
  std::vector<std::vector<std::int32_t>> levels;  // node ids per level
  std::vector<std::int32_t> leaves;
  int threshold = 1;
  int max_level = 0;
  double min_leaf_half = 0.0;
};

Tree build_tree(std::span<const Bead> beads, int threshold);

/// True when the closed cubes of the two nodes share at least a point,
/// decided exactly on the integer coordinates.
bool adjacent(const TreeNode& a, const TreeNode& b);

/// Adaptive-FMM interaction lists.
///   U: per leaf, adjacent leaves including itself (direct interactions)
///   V: per node, same-level well-separated children of the parent's
///      colleagues (multipole-to-local)
///   W: per leaf, non-adjacent descendants of colleagues whose parent is
///      adjacent (multipole evaluated at the leaf's targets)
///   X: dual of W (source points contribute directly to the local expansion)
struct InteractionLists {
  std::vector<std::vector<std::int32_t>> U, V, W, X;
};

InteractionLists compute_interaction_lists(const Tree& tree);

}  // namespace hydrofmm
