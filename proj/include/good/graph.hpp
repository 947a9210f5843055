#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "good/matrix.hpp"
#include "good/sparse.hpp"

namespace good {

using NodeId = std::size_t;
using ContextId = std::size_t;
// Zero-based time step; nullopt marks a time-independent ("static") context.
using TimeStep = std::optional<std::size_t>;
using NodePair = std::pair<NodeId, NodeId>;

enum class EdgeLabel { Positive, Negative };

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 1.0;
    EdgeLabel label = EdgeLabel::Positive;

    bool operator==(const Edge&) const = default;
};

/// Shape of a dynamic multi-relational graph. Contexts [0, num_known_contexts)
/// are inputs; the remaining ones are out-of-domain targets.
struct GraphMeta {
    std::size_t num_nodes = 0;
    std::vector<std::size_t> node_type_of;  // empty means a single node type
    std::size_t num_contexts = 0;
    std::size_t num_known_contexts = 0;
    std::size_t num_steps = 0;
    std::vector<bool> time_dependent;  // per context; empty means all time dependent

    void validate() const;
    bool is_time_dependent(ContextId c) const;
    std::vector<ContextId> known_contexts() const;
    std::vector<ContextId> target_contexts() const;
};

/// Undirected edges of one (context, time). Each logical edge is kept once
/// under its canonical (min, max) key and exposed in both directions.
class EdgeSet {
public:
    EdgeSet() = default;
    EdgeSet(ContextId context, TimeStep time) : context_(context), time_(time) {}

    ContextId context() const noexcept { return context_; }
    TimeStep time() const noexcept { return time_; }

    // Rejects self loops and negative weights; re-adding an existing pair
    // overwrites it.
    void set_edge(NodeId u, NodeId v, double weight, EdgeLabel label);

    // Both directions of every logical edge, deterministic order.
    std::vector<Edge> directed_edges() const;
    // One entry per logical edge with src < dst.
    std::vector<Edge> canonical_edges() const;
    std::vector<NodePair> canonical_pairs(EdgeLabel label) const;

    bool contains(NodeId u, NodeId v, EdgeLabel label) const;
    std::optional<Edge> find(NodeId u, NodeId v) const;
    std::size_t logical_size() const noexcept { return edges_.size(); }
    std::size_t count(EdgeLabel label) const;
    NodeId max_node() const;

private:
    struct Info {
        double weight;
        EdgeLabel label;
    };
    ContextId context_ = 0;
    TimeStep time_;
    std::map<NodePair, Info> edges_;
};

/// Normalized adjacency D^-1/2 (A + I) D^-1/2 of one snapshot, built from the
/// positive edges only; `degree` is the raw neighbour count (no self loop).
struct Snapshot {
    ContextId context = 0;
    TimeStep time;
    SparseMatrix adj_norm;
    std::vector<std::size_t> degree;
};

Snapshot build_snapshot(const EdgeSet& edges, std::size_t num_nodes);

enum class FeatureSource { Loaded, Learnable };

struct FeatureMatrix {
    FeatureSource source = FeatureSource::Loaded;
    std::size_t dim = 0;
    Matrix values;  // |V| x dim when loaded; empty when learnable

    static FeatureMatrix learnable(std::size_t dim);
    static FeatureMatrix loaded(Matrix values);
};

class MultiRelGraph {
public:
    MultiRelGraph() = default;
    MultiRelGraph(GraphMeta meta, std::vector<EdgeSet> edge_sets, FeatureMatrix features);

    const GraphMeta& meta() const noexcept { return meta_; }
    const FeatureMatrix& features() const noexcept { return features_; }
    std::size_t num_nodes() const noexcept { return meta_.num_nodes; }

    bool has(ContextId c, TimeStep t) const;
    const EdgeSet& edges(ContextId c, TimeStep t) const;
    const Snapshot& snapshot(ContextId c, TimeStep t) const;
    // Snapshot a context contributes at step t: static contexts ignore t.
    const Snapshot& snapshot_at(ContextId c, std::size_t t) const;
    const EdgeSet& edges_at(ContextId c, std::size_t t) const;
    std::vector<const EdgeSet*> all_edge_sets() const;

private:
    using Key = std::pair<ContextId, long long>;
    static Key key(ContextId c, TimeStep t);

    GraphMeta meta_;
    FeatureMatrix features_;
    std::map<Key, EdgeSet> edge_sets_;
    std::map<Key, Snapshot> snapshots_;
};

// ---- splits -----------------------------------------------------------------

struct Window {
    std::vector<std::size_t> inputs;  // zero-based steps, consecutive
    std::size_t target = 0;           // inputs.back() + 1
};

struct SplitSpec {
    Window train;
    Window validation;
    Window test;
};

// Rolling windows over zero-based steps: train inputs [0, window) predict
// step `window`; validation and test shift by one and two.
SplitSpec rolling_splits(std::size_t num_steps, std::size_t window);

// Positive edges of (c, t) as canonical (src < dst) pairs.
std::vector<NodePair> positive_edges(const MultiRelGraph& graph, ContextId c, TimeStep t);

// ---- file formats -----------------------------------------------------------

// CSV with header `src,dst,context,time,weight,label`. Context tokens are
// `c<k>` (or a bare integer), time tokens `t<k>` (zero based, or a bare
// integer) or `static`, labels `pos` / `neg`.
std::vector<EdgeSet> load_edges(const std::filesystem::path& path, const GraphMeta& meta);
void write_edges(const std::filesystem::path& path, const std::vector<const EdgeSet*>& sets);

// CSV with header `node,f0,f1,...`, one row per node.
FeatureMatrix load_features(const std::filesystem::path& path, std::size_t num_nodes);
void write_features(const std::filesystem::path& path, const Matrix& values);
// Either a feature CSV path or the literal `learnable:<dim>`.
FeatureMatrix resolve_features(const std::string& spec, const std::filesystem::path& base_dir,
                               std::size_t num_nodes);

std::string context_token(ContextId c);
std::string time_token(TimeStep t);

} // namespace good
