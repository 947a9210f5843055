#include "good/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "good/errors.hpp"

namespace good {

// ---- GraphMeta ----------------------------------------------------------------

void GraphMeta::validate() const {
    if (num_nodes == 0) {
        throw ValidationError("graph needs at least one node");
    }
    if (num_known_contexts < 1 || num_known_contexts >= num_contexts) {
        throw ValidationError("need 1 <= known contexts < contexts, got " +
                              std::to_string(num_known_contexts) + " of " +
                              std::to_string(num_contexts));
    }
    if (!time_dependent.empty() && time_dependent.size() != num_contexts) {
        throw ValidationError("time_dependent flags must cover every context");
    }
    if (!node_type_of.empty() && node_type_of.size() != num_nodes) {
        throw ValidationError("node_type_of must cover every node");
    }
    bool any_dynamic = false;
    for (ContextId c = 0; c < num_contexts; ++c) {
        any_dynamic = any_dynamic || is_time_dependent(c);
    }
    if (any_dynamic && num_steps < 2) {
        throw ValidationError("time-dependent contexts need at least 2 steps");
    }
}

bool GraphMeta::is_time_dependent(ContextId c) const {
    return time_dependent.empty() ? true : time_dependent.at(c);
}

std::vector<ContextId> GraphMeta::known_contexts() const {
    std::vector<ContextId> out;
    for (ContextId c = 0; c < num_known_contexts; ++c) {
        out.push_back(c);
    }
    return out;
}

std::vector<ContextId> GraphMeta::target_contexts() const {
    std::vector<ContextId> out;
    for (ContextId c = num_known_contexts; c < num_contexts; ++c) {
        out.push_back(c);
    }
    return out;
}

// ---- EdgeSet ------------------------------------------------------------------

void EdgeSet::set_edge(NodeId u, NodeId v, double weight, EdgeLabel label) {
    if (u == v) {
        throw ValidationError("self loop on node " + std::to_string(u));
    }
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
        throw ValidationError("edge weight must be finite and nonnegative");
    }
    edges_[{std::min(u, v), std::max(u, v)}] = Info{weight, label};
}

std::vector<Edge> EdgeSet::directed_edges() const {
    std::vector<Edge> out;
    out.reserve(2 * edges_.size());
    for (const auto& [k, info] : edges_) {
        out.push_back({k.first, k.second, info.weight, info.label});
        out.push_back({k.second, k.first, info.weight, info.label});
    }
    return out;
}

std::vector<Edge> EdgeSet::canonical_edges() const {
    std::vector<Edge> out;
    out.reserve(edges_.size());
    for (const auto& [k, info] : edges_) {
        out.push_back({k.first, k.second, info.weight, info.label});
    }
    return out;
}

std::vector<NodePair> EdgeSet::canonical_pairs(EdgeLabel label) const {
    std::vector<NodePair> out;
    for (const auto& [k, info] : edges_) {
        if (info.label == label) {
            out.push_back(k);
        }
    }
    return out;
}

bool EdgeSet::contains(NodeId u, NodeId v, EdgeLabel label) const {
    const auto it = edges_.find({std::min(u, v), std::max(u, v)});
    return it != edges_.end() && it->second.label == label;
}

std::optional<Edge> EdgeSet::find(NodeId u, NodeId v) const {
    const auto it = edges_.find({std::min(u, v), std::max(u, v)});
    if (it == edges_.end()) {
        return std::nullopt;
    }
    return Edge{it->first.first, it->first.second, it->second.weight, it->second.label};
}

std::size_t EdgeSet::count(EdgeLabel label) const {
    return static_cast<std::size_t>(std::count_if(
        edges_.begin(), edges_.end(), [label](const auto& kv) { return kv.second.label == label; }));
}

NodeId EdgeSet::max_node() const {
    NodeId m = 0;
    for (const auto& [k, info] : edges_) {
        m = std::max(m, k.second);
    }
    return m;
}

// ---- Snapshot -----------------------------------------------------------------

Snapshot build_snapshot(const EdgeSet& edges, std::size_t num_nodes) {
    std::vector<std::vector<NodeId>> neighbours(num_nodes);
    for (const Edge& e : edges.canonical_edges()) {
        if (e.src >= num_nodes || e.dst >= num_nodes) {
            throw ValidationError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                                  ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (e.label != EdgeLabel::Positive) {
            continue;
        }
        neighbours[e.src].push_back(e.dst);
        neighbours[e.dst].push_back(e.src);
    }

    Snapshot snap;
    snap.context = edges.context();
    snap.time = edges.time();
    snap.degree.resize(num_nodes);
    std::vector<double> inv_sqrt(num_nodes);
    for (NodeId v = 0; v < num_nodes; ++v) {
        snap.degree[v] = neighbours[v].size();
        inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(snap.degree[v] + 1));
    }

    SparseMatrix& a = snap.adj_norm;
    a.n = num_nodes;
    a.row_ptr.assign(num_nodes + 1, 0);
    for (NodeId v = 0; v < num_nodes; ++v) {
        auto& nb = neighbours[v];
        nb.push_back(v);
        std::sort(nb.begin(), nb.end());
        a.row_ptr[v + 1] = a.row_ptr[v] + nb.size();
    }
    a.col_idx.reserve(a.row_ptr.back());
    a.values.reserve(a.row_ptr.back());
    for (NodeId v = 0; v < num_nodes; ++v) {
        for (NodeId u : neighbours[v]) {
            a.col_idx.push_back(u);
            a.values.push_back(inv_sqrt[v] * inv_sqrt[u]);
        }
    }
    return snap;
}

// ---- features -----------------------------------------------------------------

FeatureMatrix FeatureMatrix::learnable(std::size_t dim) {
    if (dim == 0) {
        throw ValidationError("learnable feature dimension must be positive");
    }
    FeatureMatrix f;
    f.source = FeatureSource::Learnable;
    f.dim = dim;
    return f;
}

FeatureMatrix FeatureMatrix::loaded(Matrix values) {
    FeatureMatrix f;
    f.source = FeatureSource::Loaded;
    f.dim = values.cols();
    f.values = std::move(values);
    return f;
}

// ---- MultiRelGraph ------------------------------------------------------------

MultiRelGraph::Key MultiRelGraph::key(ContextId c, TimeStep t) {
    return {c, t ? static_cast<long long>(*t) : -1LL};
}

MultiRelGraph::MultiRelGraph(GraphMeta meta, std::vector<EdgeSet> edge_sets, FeatureMatrix features)
    : meta_(std::move(meta)), features_(std::move(features)) {
    meta_.validate();
    if (features_.source == FeatureSource::Loaded && features_.values.rows() != meta_.num_nodes) {
        throw ValidationError("feature matrix has " + std::to_string(features_.values.rows()) +
                              " rows for " + std::to_string(meta_.num_nodes) + " nodes");
    }
    for (EdgeSet& es : edge_sets) {
        const ContextId c = es.context();
        if (c >= meta_.num_contexts) {
            throw ValidationError("edge set for unknown context " + std::to_string(c));
        }
        if (meta_.is_time_dependent(c) != es.time().has_value()) {
            throw ValidationError("edge set time does not match the time dependence of context " +
                                  std::to_string(c));
        }
        if (es.time() && *es.time() >= meta_.num_steps) {
            throw ValidationError("edge set time step " + std::to_string(*es.time()) +
                                  " out of range");
        }
        if (es.logical_size() > 0 && es.max_node() >= meta_.num_nodes) {
            throw ValidationError("edge set references node " + std::to_string(es.max_node()) +
                                  " beyond " + std::to_string(meta_.num_nodes) + " nodes");
        }
        const Key k = key(c, es.time());
        if (edge_sets_.count(k) != 0) {
            throw ValidationError("duplicate edge set for context " + std::to_string(c));
        }
        edge_sets_.emplace(k, std::move(es));
    }
    for (ContextId c = 0; c < meta_.num_contexts; ++c) {
        if (meta_.is_time_dependent(c)) {
            for (std::size_t t = 0; t < meta_.num_steps; ++t) {
                edge_sets_.try_emplace(key(c, t), c, TimeStep(t));
            }
        } else {
            edge_sets_.try_emplace(key(c, std::nullopt), c, std::nullopt);
        }
    }
    for (const auto& [k, es] : edge_sets_) {
        snapshots_.emplace(k, build_snapshot(es, meta_.num_nodes));
    }
}

bool MultiRelGraph::has(ContextId c, TimeStep t) const {
    return edge_sets_.count(key(c, t)) != 0;
}

const EdgeSet& MultiRelGraph::edges(ContextId c, TimeStep t) const {
    const auto it = edge_sets_.find(key(c, t));
    if (it == edge_sets_.end()) {
        throw LookupError("no edge set for context " + std::to_string(c) + " at time " +
                          time_token(t));
    }
    return it->second;
}

const Snapshot& MultiRelGraph::snapshot(ContextId c, TimeStep t) const {
    const auto it = snapshots_.find(key(c, t));
    if (it == snapshots_.end()) {
        throw LookupError("no snapshot for context " + std::to_string(c) + " at time " +
                          time_token(t));
    }
    return it->second;
}

const Snapshot& MultiRelGraph::snapshot_at(ContextId c, std::size_t t) const {
    return meta_.is_time_dependent(c) ? snapshot(c, t) : snapshot(c, std::nullopt);
}

const EdgeSet& MultiRelGraph::edges_at(ContextId c, std::size_t t) const {
    return meta_.is_time_dependent(c) ? edges(c, t) : edges(c, std::nullopt);
}

std::vector<const EdgeSet*> MultiRelGraph::all_edge_sets() const {
    std::vector<const EdgeSet*> out;
    for (const auto& [k, es] : edge_sets_) {
        out.push_back(&es);
    }
    return out;
}

// ---- splits -------------------------------------------------------------------

SplitSpec rolling_splits(std::size_t num_steps, std::size_t window) {
    if (window == 0) {
        throw ArgumentError("rolling window must be at least 1");
    }
    if (num_steps < window + 3) {
        throw ArgumentError("rolling splits need at least window + 3 = " +
                            std::to_string(window + 3) + " steps, got " + std::to_string(num_steps));
    }
    auto make = [window](std::size_t start) {
        Window w;
        for (std::size_t i = 0; i < window; ++i) {
            w.inputs.push_back(start + i);
        }
        w.target = start + window;
        return w;
    };
    return SplitSpec{make(0), make(1), make(2)};
}

std::vector<NodePair> positive_edges(const MultiRelGraph& graph, ContextId c, TimeStep t) {
    return graph.edges(c, t).canonical_pairs(EdgeLabel::Positive);
}

// ---- file formats -------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::size_t parse_prefixed(const std::string& token, char prefix, std::size_t line_no,
                           const char* what) {
    std::string digits = token;
    if (!digits.empty() && digits.front() == prefix) {
        digits.erase(digits.begin());
    }
    std::size_t value = 0;
    if (digits.empty() || !parse_number(digits, value)) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + token + "'");
    }
    return value;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

std::string context_token(ContextId c) {
    return "c" + std::to_string(c);
}

std::string time_token(TimeStep t) {
    return t ? "t" + std::to_string(*t) : std::string("static");
}

std::vector<EdgeSet> load_edges(const std::filesystem::path& path, const GraphMeta& meta) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open edge list " + path.string());
    }
    struct Row {
        double weight;
        EdgeLabel label;
    };
    // (context, time, src, dst) -> summed weight of identical directed rows
    using DirKey = std::tuple<ContextId, long long, NodeId, NodeId>;
    std::map<DirKey, Row> directed;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cols = split_csv(line);
        if (!header_seen) {
            header_seen = true;
            const std::vector<std::string> expected{"src", "dst", "context", "time", "weight", "label"};
            if (cols != expected) {
                throw ParseError("line 1: expected header src,dst,context,time,weight,label");
            }
            continue;
        }
        if (cols.size() != 6) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 6 columns, got " +
                             std::to_string(cols.size()));
        }
        NodeId src = 0;
        NodeId dst = 0;
        if (!parse_number(cols[0], src) || !parse_number(cols[1], dst)) {
            throw ParseError("line " + std::to_string(line_no) + ": bad node id");
        }
        if (src >= meta.num_nodes || dst >= meta.num_nodes) {
            throw ParseError("line " + std::to_string(line_no) + ": unknown node id " +
                             std::to_string(std::max(src, dst)));
        }
        const ContextId c = parse_prefixed(cols[2], 'c', line_no, "context");
        if (c >= meta.num_contexts) {
            throw ParseError("line " + std::to_string(line_no) + ": unknown context '" + cols[2] + "'");
        }
        long long t = -1;
        if (cols[3] == "static") {
            if (meta.is_time_dependent(c)) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": static time for time-dependent context " + cols[2]);
            }
        } else {
            const std::size_t step = parse_prefixed(cols[3], 't', line_no, "time");
            if (!meta.is_time_dependent(c) || step >= meta.num_steps) {
                throw ParseError("line " + std::to_string(line_no) + ": unknown time '" + cols[3] + "'");
            }
            t = static_cast<long long>(step);
        }
        double weight = 0.0;
        if (!parse_number(cols[4], weight) || !std::isfinite(weight)) {
            throw ParseError("line " + std::to_string(line_no) + ": bad weight '" + cols[4] + "'");
        }
        if (weight < 0.0) {
            throw ValidationError("line " + std::to_string(line_no) + ": negative weight " + cols[4]);
        }
        EdgeLabel label;
        if (cols[5] == "pos") {
            label = EdgeLabel::Positive;
        } else if (cols[5] == "neg") {
            label = EdgeLabel::Negative;
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": bad label '" + cols[5] + "'");
        }
        if (src == dst) {
            throw ValidationError("line " + std::to_string(line_no) + ": self loop on node " +
                                  std::to_string(src));
        }
        auto [it, inserted] = directed.try_emplace(DirKey{c, t, src, dst}, Row{weight, label});
        if (!inserted) {
            if (it->second.label != label) {
                throw ValidationError("line " + std::to_string(line_no) +
                                      ": conflicting labels for a repeated edge");
            }
            it->second.weight += weight;
        }
    }

    // Fold the two directions of each pair; a mirrored row restates the same
    // undirected edge, so the larger directed total wins.
    std::map<std::pair<ContextId, long long>, EdgeSet> sets;
    for (const auto& [k, row] : directed) {
        const auto& [c, t, src, dst] = k;
        auto [it, inserted] = sets.try_emplace(
            {c, t}, c, t < 0 ? TimeStep{} : TimeStep{static_cast<std::size_t>(t)});
        EdgeSet& es = it->second;
        double weight = row.weight;
        if (const auto existing = es.find(src, dst)) {
            if (existing->label != row.label) {
                throw ValidationError("conflicting labels between directions of edge (" +
                                      std::to_string(src) + "," + std::to_string(dst) + ")");
            }
            weight = std::max(weight, existing->weight);
        }
        es.set_edge(src, dst, weight, row.label);
    }
    std::vector<EdgeSet> out;
    out.reserve(sets.size());
    for (auto& [k, es] : sets) {
        out.push_back(std::move(es));
    }
    return out;
}

void write_edges(const std::filesystem::path& path, const std::vector<const EdgeSet*>& sets) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write edge list " + path.string());
    }
    out << "src,dst,context,time,weight,label\n";
    for (const EdgeSet* es : sets) {
        for (const Edge& e : es->directed_edges()) {
            out << e.src << ',' << e.dst << ',' << context_token(es->context()) << ','
                << time_token(es->time()) << ',' << format_double(e.weight) << ','
                << (e.label == EdgeLabel::Positive ? "pos" : "neg") << '\n';
        }
    }
    if (!out) {
        throw IoError("failed writing edge list " + path.string());
    }
}

FeatureMatrix load_features(const std::filesystem::path& path, std::size_t num_nodes) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open feature file " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    Matrix values;
    std::vector<bool> seen(num_nodes, false);
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cols = split_csv(line);
        if (!header_seen) {
            header_seen = true;
            if (cols.size() < 2 || cols[0] != "node") {
                throw ParseError("line 1: expected header node,f0,f1,...");
            }
            for (std::size_t j = 1; j < cols.size(); ++j) {
                if (cols[j] != "f" + std::to_string(j - 1)) {
                    throw ParseError("line 1: unexpected feature column '" + cols[j] + "'");
                }
            }
            dim = cols.size() - 1;
            values = Matrix(num_nodes, dim);
            continue;
        }
        if (cols.size() != dim + 1) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim + 1) + " columns");
        }
        NodeId node = 0;
        if (!parse_number(cols[0], node) || node >= num_nodes) {
            throw ParseError("line " + std::to_string(line_no) + ": unknown node id '" + cols[0] + "'");
        }
        if (seen[node]) {
            throw ParseError("line " + std::to_string(line_no) + ": duplicate node " + cols[0]);
        }
        seen[node] = true;
        for (std::size_t j = 0; j < dim; ++j) {
            double v = 0.0;
            if (!parse_number(cols[j + 1], v) || !std::isfinite(v)) {
                throw ParseError("line " + std::to_string(line_no) + ": bad feature value '" +
                                 cols[j + 1] + "'");
            }
            values(node, j) = v;
        }
    }
    if (!header_seen) {
        throw ParseError("feature file " + path.string() + " is empty");
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw ValidationError("feature file does not cover every node");
    }
    return FeatureMatrix::loaded(std::move(values));
}

void write_features(const std::filesystem::path& path, const Matrix& values) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write feature file " + path.string());
    }
    out << "node";
    for (std::size_t j = 0; j < values.cols(); ++j) {
        out << ",f" << j;
    }
    out << '\n';
    for (std::size_t i = 0; i < values.rows(); ++i) {
        out << i;
        for (double v : values.row(i)) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing feature file " + path.string());
    }
}

FeatureMatrix resolve_features(const std::string& spec, const std::filesystem::path& base_dir,
                               std::size_t num_nodes) {
    const std::string prefix = "learnable:";
    if (spec.rfind(prefix, 0) == 0) {
        std::size_t dim = 0;
        if (!parse_number(spec.substr(prefix.size()), dim) || dim == 0) {
            throw ParseError("bad learnable feature spec '" + spec + "'");
        }
        return FeatureMatrix::learnable(dim);
    }
    std::filesystem::path p(spec);
    if (p.is_relative()) {
        p = base_dir / p;
    }
    return load_features(p, num_nodes);
}

} // namespace good
