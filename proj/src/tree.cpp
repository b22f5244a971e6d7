#include "hydrofmm/tree.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace hydrofmm {

namespace {

struct Builder {
  Tree& t;
  std::vector<Bead> scratch_beads;
  std::vector<std::int32_t> scratch_perm;
  std::vector<std::uint8_t> oct;

  void subdivide(std::int32_t id) {
    TreeNode& node = t.nodes[id];
    if (node.count() <= t.threshold) {
      finish_leaf(id);
      return;
    }
    if (node.level >= kMaxTreeDepth) {
      throw std::runtime_error("coincident points exceed depth limit");
    }

    const std::int32_t b = node.begin, e = node.end;
    const Point3 c = node.cube.center;
    std::array<std::int32_t, 8> count{};
    for (std::int32_t i = b; i < e; ++i) {
      const Point3& p = t.beads[i].position;
      const std::uint8_t o = std::uint8_t((p.x >= c.x) | ((p.y >= c.y) << 1) |
                                          ((p.z >= c.z) << 2));
      oct[i] = o;
      ++count[o];
    }
    std::array<std::int32_t, 8> offset{};
    for (int o = 1; o < 8; ++o) offset[o] = offset[o - 1] + count[o - 1];
    for (std::int32_t i = b; i < e; ++i) {
      const std::int32_t pos = b + offset[oct[i]]++;
      scratch_beads[pos] = t.beads[i];
      scratch_perm[pos] = t.perm[i];
    }
    std::copy(scratch_beads.begin() + b, scratch_beads.begin() + e,
              t.beads.begin() + b);
    std::copy(scratch_perm.begin() + b, scratch_perm.begin() + e,
              t.perm.begin() + b);

    const double child_half = node.cube.half_width * 0.5;
    std::int32_t child_begin = b;
    const int level = node.level;
    const std::uint64_t ix = node.ix, iy = node.iy, iz = node.iz;
    for (int o = 0; o < 8; ++o) {
      if (count[o] == 0) continue;
      TreeNode child;
      child.cube.center = {c.x + ((o & 1) ? child_half : -child_half),
                           c.y + ((o & 2) ? child_half : -child_half),
                           c.z + ((o & 4) ? child_half : -child_half)};
      child.cube.half_width = child_half;
      child.parent = id;
      child.begin = child_begin;
      child.end = child_begin + count[o];
      child.level = level + 1;
      child.ix = 2 * ix + ((o >> 0) & 1);
      child.iy = 2 * iy + ((o >> 1) & 1);
      child.iz = 2 * iz + ((o >> 2) & 1);
      child_begin = child.end;

      const std::int32_t child_id = std::int32_t(t.nodes.size());
      t.nodes.push_back(child);
      t.nodes[id].children[o] = child_id;
      subdivide(child_id);
    }
  }

  void finish_leaf(std::int32_t id) {
    TreeNode& node = t.nodes[id];
    node.leaf = true;
    // Canonical in-leaf ordering: sort by position so results do not depend
    // on the order beads arrived in.
    const std::int32_t b = node.begin, e = node.end;
    std::vector<std::int32_t> idx(e - b);
    for (std::int32_t i = 0; i < e - b; ++i) idx[i] = b + i;
    std::sort(idx.begin(), idx.end(), [&](std::int32_t l, std::int32_t r) {
      const Point3& pl = t.beads[l].position;
      const Point3& pr = t.beads[r].position;
      return std::tie(pl.x, pl.y, pl.z, t.perm[l]) <
             std::tie(pr.x, pr.y, pr.z, t.perm[r]);
    });
    for (std::int32_t i = 0; i < e - b; ++i) {
      scratch_beads[b + i] = t.beads[idx[i]];
      scratch_perm[b + i] = t.perm[idx[i]];
    }
    std::copy(scratch_beads.begin() + b, scratch_beads.begin() + e,
              t.beads.begin() + b);
    std::copy(scratch_perm.begin() + b, scratch_perm.begin() + e,
              t.perm.begin() + b);
  }
};

}  // namespace

Tree build_tree(std::span<const Bead> beads, int threshold) {
  if (threshold < 1) throw std::invalid_argument("threshold must be >= 1");
  Tree t;
  t.threshold = threshold;
  t.beads.assign(beads.begin(), beads.end());
  t.perm.resize(beads.size());
  for (std::size_t i = 0; i < beads.size(); ++i) t.perm[i] = std::int32_t(i);

  TreeNode root;
  root.cube = compute_bounding_cube(beads);
  root.begin = 0;
  root.end = std::int32_t(beads.size());
  t.nodes.push_back(root);

  Builder builder{t, std::vector<Bead>(beads.size()),
                  std::vector<std::int32_t>(beads.size()),
                  std::vector<std::uint8_t>(beads.size())};
  builder.subdivide(0);

  t.max_level = 0;
  for (const TreeNode& n : t.nodes) t.max_level = std::max(t.max_level, n.level);
  t.levels.assign(t.max_level + 1, {});
  t.min_leaf_half = t.nodes[0].cube.half_width;
  for (std::int32_t id = 0; id < std::int32_t(t.nodes.size()); ++id) {
    t.levels[t.nodes[id].level].push_back(id);
    if (t.nodes[id].leaf) {
      t.leaves.push_back(id);
      t.min_leaf_half = std::min(t.min_leaf_half, t.nodes[id].cube.half_width);
    }
  }
  return t;
}

bool adjacent(const TreeNode& a, const TreeNode& b) {
  const int level = std::max(a.level, b.level);
  const int sa = level - a.level;
  const int sb = level - b.level;
  const auto touches = [&](std::uint64_t ca, std::uint64_t cb) {
    using I = unsigned __int128;
    const I lo_a = I(ca) << sa, hi_a = I(ca + 1) << sa;
    const I lo_b = I(cb) << sb, hi_b = I(cb + 1) << sb;
    return lo_a <= hi_b && lo_b <= hi_a;
  };
  return touches(a.ix, b.ix) && touches(a.iy, b.iy) && touches(a.iz, b.iz);
}

InteractionLists compute_interaction_lists(const Tree& tree) {
  const std::size_t n = tree.nodes.size();
  InteractionLists lists;
  lists.U.resize(n);
  lists.V.resize(n);
  lists.W.resize(n);
  lists.X.resize(n);

  // Same-level adjacent boxes, computed top-down: candidates are the
  // children of the parent's colleagues plus the siblings.
  std::vector<std::vector<std::int32_t>> colleagues(n);
  for (int level = 1; level <= tree.max_level; ++level) {
    const auto& ids = tree.levels[level];
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t q = 0; q < ids.size(); ++q) {
      const std::int32_t id = ids[q];
      const TreeNode& node = tree.nodes[id];
      const std::int32_t parent = node.parent;
      auto consider = [&](std::int32_t cand) {
        if (cand < 0 || cand == id) return;
        const TreeNode& c = tree.nodes[cand];
        const std::int64_t dx = std::int64_t(c.ix) - std::int64_t(node.ix);
        const std::int64_t dy = std::int64_t(c.iy) - std::int64_t(node.iy);
        const std::int64_t dz = std::int64_t(c.iz) - std::int64_t(node.iz);
        if (std::abs(dx) <= 1 && std::abs(dy) <= 1 && std::abs(dz) <= 1) {
          colleagues[id].push_back(cand);
        } else {
          lists.V[id].push_back(cand);
        }
      };
      for (std::int32_t sib : tree.nodes[parent].children) consider(sib);
      for (std::int32_t pc : colleagues[parent]) {
        for (std::int32_t child : tree.nodes[pc].children) consider(child);
      }
    }
  }

  // U: every leaf adjacent to the leaf box, found from the root. W: maximal
  // non-adjacent descendants of colleagues whose parent is adjacent.
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t q = 0; q < tree.leaves.size(); ++q) {
    const std::int32_t id = tree.leaves[q];
    const TreeNode& node = tree.nodes[id];

    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
      const std::int32_t cur = stack.back();
      stack.pop_back();
      const TreeNode& c = tree.nodes[cur];
      if (!adjacent(c, node)) continue;
      if (c.leaf) {
        lists.U[id].push_back(cur);
      } else {
        for (std::int32_t child : c.children) {
          if (child >= 0) stack.push_back(child);
        }
      }
    }
    std::sort(lists.U[id].begin(), lists.U[id].end());

    for (std::int32_t col : colleagues[id]) {
      if (tree.nodes[col].leaf) continue;
      std::vector<std::int32_t> wstack;
      for (std::int32_t child : tree.nodes[col].children) {
        if (child >= 0) wstack.push_back(child);
      }
      while (!wstack.empty()) {
        const std::int32_t cur = wstack.back();
        wstack.pop_back();
        const TreeNode& c = tree.nodes[cur];
        if (adjacent(c, node)) {
          if (!c.leaf) {
            for (std::int32_t child : c.children) {
              if (child >= 0) wstack.push_back(child);
            }
          }
          // adjacent leaves are already in U
        } else {
          lists.W[id].push_back(cur);
        }
      }
    }
    std::sort(lists.W[id].begin(), lists.W[id].end());
  }

  // X is the dual of W; fill serially in leaf order so it is deterministic.
  for (std::int32_t leaf : tree.leaves) {
    for (std::int32_t w : lists.W[leaf]) {
      lists.X[w].push_back(leaf);
    }
  }
  return lists;
}

}  // namespace hydrofmm
