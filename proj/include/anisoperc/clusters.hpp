#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "anisoperc/lattice.hpp"
#include "anisoperc/sampling.hpp"

namespace anisoperc {

// Union-find with path compression and union by size. When constructed with
// a dimension, each node also carries its displacement to its parent in the
// unrolled lattice; a union that closes a loop with nonzero net displacement
// marks the component as winding along that axis.
class UnionFind {
public:
  explicit UnionFind(std::uint32_t n, int displacement_dims = 0)
      : parent_(n), size_(n, 1), dims_(displacement_dims), components_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
    if (dims_ > 0) {
      offset_.assign(static_cast<std::size_t>(n) * dims_, 0);
      wrap_.assign(n, 0);
    }
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(parent_.size()); }
  std::uint32_t components() const { return components_; }
  bool tracks_displacement() const { return dims_ > 0; }

  std::uint32_t find(std::uint32_t x) {
    if (dims_ == 0) {
      while (parent_[x] != x) {
        parent_[x] = parent_[parent_[x]];
        x = parent_[x];
      }
      return x;
    }
    path_.clear();
    while (parent_[x] != x) {
      path_.push_back(x);
      x = parent_[x];
    }
    const std::uint32_t root = x;
    for (std::size_t i = path_.size(); i-- > 0;) {
      const std::uint32_t v = path_[i];
      const std::uint32_t p = parent_[v];
      if (p != root) {
        for (int k = 0; k < dims_; ++k) offset_[v * dims_ + k] += offset_[p * dims_ + k];
      }
      parent_[v] = root;
    }
    return root;
  }

  // Union along an edge a -> b with unrolled displacement `step` (b = a + step).
  bool unite(std::uint32_t a, std::uint32_t b, const int* step = nullptr) {
    std::uint32_t ra = find(a);
    std::uint32_t rb = find(b);
    if (dims_ == 0) {
      if (ra == rb) return false;
      if (size_[ra] < size_[rb]) std::swap(ra, rb);
      parent_[rb] = ra;
      size_[ra] += size_[rb];
      --components_;
      return true;
    }
    const int* oa = offset_.data() + static_cast<std::size_t>(a) * dims_;
    const int* ob = offset_.data() + static_cast<std::size_t>(b) * dims_;
    if (ra == rb) {
      for (int k = 0; k < dims_; ++k) {
        const int loop = (a == ra ? 0 : oa[k]) + step[k] - (b == rb ? 0 : ob[k]);
        if (loop != 0) wrap_[ra] |= std::uint64_t{1} << k;
      }
      return false;
    }
    // pos(rb) - pos(ra) = oa + step - ob
    std::vector<int>& delta = scratch_;
    delta.resize(dims_);
    for (int k = 0; k < dims_; ++k) delta[k] = (a == ra ? 0 : oa[k]) + step[k] - (b == rb ? 0 : ob[k]);
    if (size_[ra] < size_[rb]) {
      std::swap(ra, rb);
      for (int& x : delta) x = -x;
    }
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    wrap_[ra] |= wrap_[rb];
    for (int k = 0; k < dims_; ++k) offset_[rb * dims_ + k] = delta[k];
    --components_;
    return true;
  }

  std::uint32_t component_size(std::uint32_t root) const { return size_[root]; }
  std::uint64_t wrap_mask(std::uint32_t root) const { return dims_ > 0 ? wrap_[root] : 0; }

private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
  int dims_;
  std::vector<int> offset_;
  std::vector<std::uint64_t> wrap_;
  std::vector<std::uint32_t> path_;
  std::vector<int> scratch_;
  std::uint32_t components_;
};

// Flattened union-find result: root per vertex and component sizes.
struct ClusterLabeling {
  std::vector<std::uint32_t> root;   // root[v] == root[root[v]]
  std::vector<std::uint32_t> size;   // size[r] valid at roots
  std::vector<std::uint64_t> wraps;  // winding mask at roots (empty if not tracked)
  std::uint32_t components = 0;

  bool connected(std::uint32_t a, std::uint32_t b) const { return root[a] == root[b]; }
  std::uint32_t cluster_size(std::uint32_t v) const { return size[root[v]]; }
  bool winds(std::uint32_t v, int axis) const {
    return !wraps.empty() && ((wraps[root[v]] >> axis) & 1u);
  }
};

inline bool has_ring_axis(const Lattice& lattice) {
  for (int a = 0; a < lattice.dims(); ++a)
    if (lattice.is_ring(a)) return true;
  return false;
}

// Union-find labelling of open clusters. Winding is tracked when requested,
// which is needed for wrapping observables on periodic boxes.
inline ClusterLabeling label_clusters(const Configuration& config, bool track_winding = false) {
  const Lattice& lattice = config.lattice();
  const int dims = track_winding ? lattice.dims() : 0;
  UnionFind uf(lattice.num_vertices(), dims);
  const auto edges = lattice.edges();
  const auto& steps = lattice.steps();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!config.open(e)) continue;
    uf.unite(edges[e].a, edges[e].b, dims > 0 ? steps[edges[e].dir].data() : nullptr);
  }
  ClusterLabeling out;
  const std::uint32_t n = lattice.num_vertices();
  out.root.resize(n);
  out.size.assign(n, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    out.root[v] = uf.find(v);
    out.size[out.root[v]] = uf.component_size(out.root[v]);
  }
  if (dims > 0) {
    out.wraps.assign(n, 0);
    for (std::uint32_t v = 0; v < n; ++v)
      if (out.root[v] == v) out.wraps[v] = uf.wrap_mask(v);
  }
  out.components = uf.components();
  return out;
}

inline std::uint32_t origin_cluster_size(const Configuration& config) {
  return label_clusters(config).cluster_size(config.lattice().origin());
}

struct OriginCluster {
  std::uint32_t origin = 0;
  std::uint32_t size = 1;
  std::vector<std::uint32_t> members;
};

inline OriginCluster cluster_of_origin(const Configuration& config, const ClusterLabeling& labels) {
  OriginCluster out;
  out.origin = config.lattice().origin();
  const std::uint32_t r = labels.root[out.origin];
  out.size = labels.size[r];
  for (std::uint32_t v = 0; v < labels.root.size(); ++v)
    if (labels.root[v] == r) out.members.push_back(v);
  return out;
}

inline OriginCluster cluster_of_origin(const Configuration& config) {
  return cluster_of_origin(config, label_clusters(config));
}

// Roots of clusters crossing the box along `axis`: touching both faces on a
// free axis, winding on a ring axis. Requires winding-tracked labels for rings.
inline std::vector<char> spanning_roots(const Lattice& lattice, const ClusterLabeling& labels, int axis) {
  const std::uint32_t n = lattice.num_vertices();
  std::vector<char> out(n, 0);
  if (lattice.is_ring(axis)) {
    if (labels.wraps.empty()) throw SpecError("spans: winding was not tracked for a periodic axis");
    for (std::uint32_t v = 0; v < n; ++v)
      if (labels.root[v] == v && ((labels.wraps[v] >> axis) & 1u)) out[v] = 1;
    return out;
  }
  const int last = lattice.side(axis) - 1;
  std::vector<char> low(n, 0);
  for (std::uint32_t v = 0; v < n; ++v)
    if (lattice.coordinate(v, axis) == 0) low[labels.root[v]] = 1;
  for (std::uint32_t v = 0; v < n; ++v)
    if (lattice.coordinate(v, axis) == last && low[labels.root[v]]) out[labels.root[v]] = 1;
  return out;
}

inline bool spans(const Lattice& lattice, const ClusterLabeling& labels, int axis) {
  if (axis < 0 || axis >= lattice.dims()) throw SpecError("spans: axis out of range");
  const auto roots = spanning_roots(lattice, labels, axis);
  for (char c : roots)
    if (c) return true;
  return false;
}

inline bool spans(const Configuration& config, int axis) {
  const Lattice& lattice = config.lattice();
  if (axis < 0 || axis >= lattice.dims()) throw SpecError("spans: axis out of range");
  return spans(lattice, label_clusters(config, lattice.is_ring(axis)), axis);
}

// True when the cluster of v has a vertex in the boundary shell of a free Z^d
// factor (some U-neighbour outside the box).
inline bool reaches_boundary(const Lattice& lattice, const ClusterLabeling& labels, std::uint32_t v) {
  const std::uint32_t r = labels.root[v];
  const ZdBox& box = lattice.zd_box();
  for (std::uint32_t x = 0; x < labels.root.size(); ++x)
    if (labels.root[x] == r && box.in_shell(x % lattice.layer_size())) return true;
  return false;
}

struct ClusterStats {
  std::uint32_t origin_size = 1;
  std::uint32_t max_size = 1;
  std::uint32_t components = 0;
  std::vector<char> spans;  // per axis: the largest cluster crosses the box along it
};

inline ClusterStats cluster_stats(const Configuration& config) {
  const Lattice& lattice = config.lattice();
  const ClusterLabeling labels = label_clusters(config, has_ring_axis(lattice));
  ClusterStats stats;
  stats.origin_size = labels.cluster_size(lattice.origin());
  stats.components = labels.components;
  std::uint32_t max_root = 0;
  for (std::uint32_t v = 0; v < labels.root.size(); ++v) {
    if (labels.root[v] == v && labels.size[v] > stats.max_size) {
      stats.max_size = labels.size[v];
      max_root = v;
    }
  }
  if (stats.max_size == 1) max_root = labels.root[0];
  stats.spans.resize(lattice.dims());
  for (int a = 0; a < lattice.dims(); ++a) stats.spans[a] = spanning_roots(lattice, labels, a)[max_root];
  return stats;
}

// Histogram of |C(origin)| over a sample of configurations.
struct SizeHistogram {
  std::map<std::uint32_t, std::uint64_t> counts;
  std::uint64_t samples = 0;

  void add(std::uint32_t size) {
    ++counts[size];
    ++samples;
  }
  void merge(const SizeHistogram& other) {
    for (auto [k, c] : other.counts) counts[k] += c;
    samples += other.samples;
  }
  double mean() const {
    if (samples == 0) return 0.0;
    long double sum = 0;
    for (auto [k, c] : counts) sum += static_cast<long double>(k) * c;
    return static_cast<double>(sum / samples);
  }
  double probability(std::uint32_t size) const {
    auto it = counts.find(size);
    return (it == counts.end() || samples == 0) ? 0.0 : static_cast<double>(it->second) / samples;
  }
};

inline SizeHistogram size_distribution(const std::vector<Configuration>& configs) {
  SizeHistogram h;
  for (const auto& c : configs) h.add(label_clusters(c).cluster_size(c.lattice().origin()));
  return h;
}

}  // namespace anisoperc
