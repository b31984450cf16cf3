#pragma once

// Binary classification tree grown greedily by Gini impurity, with
// optional growth restrictions and minimal cost-complexity pruning.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"

namespace sovrate {

/// Gini impurity of a class histogram: sum p(i)(1 - p(i)).
inline double gini_impurity(std::span<const int> counts) {
    long total = 0;
    for (int c : counts) total += c;
    if (total <= 0) throw std::invalid_argument("gini_impurity of empty node");
    double g = 0.0;
    for (int c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g += p * (1.0 - p);
    }
    return g;
}

/// Size-weighted average impurity of the two branches of a split.
inline double split_gini(std::span<const int> left_counts, std::span<const int> right_counts) {
    long nl = 0, nr = 0;
    for (int c : left_counts) nl += c;
    for (int c : right_counts) nr += c;
    if (nl <= 0 || nr <= 0) throw std::invalid_argument("split_gini branch is empty");
    const double n = static_cast<double>(nl + nr);
    return (static_cast<double>(nl) / n) * gini_impurity(left_counts) +
           (static_cast<double>(nr) / n) * gini_impurity(right_counts);
}

struct CartConfig {
    int max_depth = -1;  // -1 = unrestricted
    int min_samples_split = 2;
    double min_impurity_decrease = 0.0;
    double ccp_alpha = 0.0;

    void validate() const {
        if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be >= 2");
        if (min_impurity_decrease < 0.0) throw std::invalid_argument("min_impurity_decrease must be >= 0");
        if (ccp_alpha < 0.0) throw std::invalid_argument("ccp_alpha must be >= 0");
    }
};

struct CartNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<int> counts;  // class histogram over 1..num_classes
    int predicted = 0;        // majority class, ties toward the lower class

    bool is_leaf() const { return feature < 0; }
};

class CartModel {
public:
    CartModel() = default;
    CartModel(int num_classes, std::vector<CartNode> nodes)
        : num_classes_(num_classes), nodes_(std::move(nodes)) {}

    int num_classes() const { return num_classes_; }
    const std::vector<CartNode>& nodes() const { return nodes_; }
    const CartNode& root() const { return nodes_.front(); }

    int leaf_count() const {
        int n = 0;
        for (const auto& node : nodes_) n += node.is_leaf();
        return n;
    }

    int depth() const { return depth_below(0); }

    /// Routes x through the comparisons; values equal to a threshold go
    /// left (the <= rule).
    int predict(std::span<const double> x) const {
        int i = 0;
        while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
            const CartNode& n = nodes_[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].predicted;
    }

    /// Preorder plain-text form: `split f<idx> <= <threshold>` for
    /// internal nodes, `leaf <count ...>` for leaves.
    std::string dump() const {
        std::ostringstream out;
        out << "cart 1 " << num_classes_ << "\n";
        dump_node(0, 0, out);
        return out.str();
    }

    static CartModel parse(std::istream& in) {
        std::string tag;
        int version = 0, m = 0;
        in >> tag >> version >> m;
        if (tag != "cart" || version != 1 || m < 1) throw ParseError("not a cart v1 dump");
        std::vector<CartNode> nodes;
        parse_node(in, m, nodes);
        if (!in) throw ParseError("truncated cart dump");
        return CartModel(m, std::move(nodes));
    }

private:
    int depth_below(int i) const {
        const CartNode& n = nodes_[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_below(n.left), depth_below(n.right));
    }

    void dump_node(int i, int indent, std::ostringstream& out) const {
        const CartNode& n = nodes_[static_cast<std::size_t>(i)];
        for (int s = 0; s < indent; ++s) out << "  ";
        if (n.is_leaf()) {
            out << "leaf";
            for (int c : n.counts) out << " " << c;
            out << "\n";
        } else {
            out << "split f" << n.feature << " <= " << fmt_double(n.threshold) << "\n";
            dump_node(n.left, indent + 1, out);
            dump_node(n.right, indent + 1, out);
        }
    }

    static int parse_node(std::istream& in, int m, std::vector<CartNode>& nodes) {
        std::string kind;
        in >> kind;
        const int idx = static_cast<int>(nodes.size());
        nodes.emplace_back();
        if (kind == "leaf") {
            CartNode leaf;
            leaf.counts.resize(static_cast<std::size_t>(m));
            for (int& c : leaf.counts) in >> c;
            leaf.predicted = majority_class(leaf.counts);
            nodes[static_cast<std::size_t>(idx)] = std::move(leaf);
        } else if (kind == "split") {
            std::string fname, le;
            double threshold = 0.0;
            in >> fname >> le >> threshold;
            if (fname.size() < 2 || fname[0] != 'f' || le != "<=") throw ParseError("bad split line in cart dump");
            CartNode node;
            try {
                node.feature = std::stoi(fname.substr(1));
            } catch (const std::exception&) {
                throw ParseError("bad feature index in cart dump: " + fname);
            }
            node.threshold = threshold;
            nodes[static_cast<std::size_t>(idx)] = std::move(node);
            const int left = parse_node(in, m, nodes);
            const int right = parse_node(in, m, nodes);
            nodes[static_cast<std::size_t>(idx)].left = left;
            nodes[static_cast<std::size_t>(idx)].right = right;
            auto& self = nodes[static_cast<std::size_t>(idx)];
            self.counts.assign(static_cast<std::size_t>(m), 0);
            for (int side : {left, right})
                for (int c = 0; c < m; ++c)
                    self.counts[static_cast<std::size_t>(c)] +=
                        nodes[static_cast<std::size_t>(side)].counts[static_cast<std::size_t>(c)];
            self.predicted = majority_class(self.counts);
        } else {
            throw ParseError("unexpected token '" + kind + "' in cart dump");
        }
        return idx;
    }

public:
    static int majority_class(std::span<const int> counts) {
        int best = 1;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > counts[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(c) + 1;
        return best;
    }

private:
    int num_classes_ = 0;
    std::vector<CartNode> nodes_;  // root at index 0, children after parents
};

struct SplitCandidate {
    int feature = 0;
    double threshold = 0.0;
    double decrease = 0.0;  // unweighted: G(node) - weighted branch Gini
};

namespace detail {

/// Scans every feature and every midpoint between consecutive distinct
/// sorted values. Ties in the decrease go to the lowest feature index,
/// then the lowest threshold. total_rows weights the decrease for the
/// min_impurity_decrease test.
inline std::optional<SplitCandidate> best_split_rows(const Matrix& x, const std::vector<int>& y,
                                                     const std::vector<std::size_t>& rows,
                                                     int num_classes, const CartConfig& config,
                                                     std::size_t total_rows) {
    const std::size_t n = rows.size();
    if (n == 0) throw std::invalid_argument("best_split of empty node");
    if (n < static_cast<std::size_t>(config.min_samples_split)) return std::nullopt;

    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t i : rows) ++counts[static_cast<std::size_t>(y[i] - 1)];
    const double node_gini = gini_impurity(counts);
    if (node_gini == 0.0) return std::nullopt;  // pure

    std::optional<SplitCandidate> best;
    std::vector<std::pair<double, int>> order(n);
    std::vector<int> left(static_cast<std::size_t>(num_classes));
    std::vector<int> right(static_cast<std::size_t>(num_classes));

    for (std::size_t f = 0; f < x.cols(); ++f) {
        for (std::size_t i = 0; i < n; ++i) order[i] = {x(rows[i], f), y[rows[i]]};
        std::sort(order.begin(), order.end());
        if (order.front().first == order.back().first) continue;  // constant feature

        std::fill(left.begin(), left.end(), 0);
        right = counts;
        std::size_t nl = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left[static_cast<std::size_t>(order[i].second - 1)];
            --right[static_cast<std::size_t>(order[i].second - 1)];
            ++nl;
            if (order[i].first == order[i + 1].first) continue;
            const double gl = gini_impurity(left);
            const double gr = gini_impurity(right);
            const double wl = static_cast<double>(nl) / static_cast<double>(n);
            const double decrease = node_gini - (wl * gl + (1.0 - wl) * gr);
            if (!best || decrease > best->decrease) {
                best = SplitCandidate{static_cast<int>(f),
                                      order[i].first + 0.5 * (order[i + 1].first - order[i].first),
                                      decrease};
            }
        }
    }

    if (!best) return std::nullopt;
    if (best->decrease <= 0.0) return std::nullopt;  // never accept a vacuous split
    const double weighted =
        (static_cast<double>(n) / static_cast<double>(total_rows)) * best->decrease;
    if (weighted < config.min_impurity_decrease) return std::nullopt;
    return best;
}

inline int grow_node(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t>& rows,
                     int num_classes, const CartConfig& config, std::size_t total_rows, int depth,
                     std::vector<CartNode>& nodes) {
    const int idx = static_cast<int>(nodes.size());
    nodes.emplace_back();
    {
        CartNode& node = nodes.back();
        node.counts.assign(static_cast<std::size_t>(num_classes), 0);
        for (std::size_t i : rows) ++node.counts[static_cast<std::size_t>(y[i] - 1)];
        node.predicted = CartModel::majority_class(node.counts);
    }

    if (config.max_depth >= 0 && depth >= config.max_depth) return idx;
    const auto split = best_split_rows(x, y, rows, num_classes, config, total_rows);
    if (!split) return idx;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows) {
        (x(i, static_cast<std::size_t>(split->feature)) <= split->threshold ? left_rows : right_rows)
            .push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes[static_cast<std::size_t>(idx)].feature = split->feature;
    nodes[static_cast<std::size_t>(idx)].threshold = split->threshold;
    const int left = grow_node(x, y, left_rows, num_classes, config, total_rows, depth + 1, nodes);
    const int right = grow_node(x, y, right_rows, num_classes, config, total_rows, depth + 1, nodes);
    nodes[static_cast<std::size_t>(idx)].left = left;
    nodes[static_cast<std::size_t>(idx)].right = right;
    return idx;
}

}  // namespace detail

/// Best split of the whole sample treated as a root node.
inline std::optional<SplitCandidate> best_split(const Matrix& x, const std::vector<int>& y,
                                                int num_classes, const CartConfig& config = {}) {
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return detail::best_split_rows(x, y, rows, num_classes, config, x.rows());
}

CartModel prune(const CartModel& model, double alpha);

/// Greedy recursive growth; the root is at depth 0. Applies
/// cost-complexity pruning afterwards when config.ccp_alpha > 0.
inline CartModel grow_cart(const Matrix& x, const std::vector<int>& y, int num_classes,
                           const CartConfig& config = {}) {
    config.validate();
    if (x.rows() == 0) throw std::invalid_argument("training set is empty");
    if (x.rows() != y.size()) throw std::invalid_argument("training labels length mismatch");
    std::vector<CartNode> nodes;
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    detail::grow_node(x, y, rows, num_classes, config, x.rows(), 0, nodes);
    CartModel model(num_classes, std::move(nodes));
    if (config.ccp_alpha > 0.0) model = prune(model, config.ccp_alpha);
    return model;
}

inline CartModel grow_cart(const Dataset& d, const CartConfig& config = {}) {
    return grow_cart(to_matrix(d), labels(d), kNumClasses, config);
}

namespace detail {

/// Squared deviation of the node's numeric labels from their within-node
/// mean; the error a collapse to a single leaf would leave behind.
inline double node_sse(const CartNode& node) {
    double n = 0.0, sum = 0.0;
    for (std::size_t c = 0; c < node.counts.size(); ++c) {
        n += node.counts[c];
        sum += static_cast<double>(c + 1) * node.counts[c];
    }
    const double mean = sum / n;
    double sse = 0.0;
    for (std::size_t c = 0; c < node.counts.size(); ++c) {
        const double d = static_cast<double>(c + 1) - mean;
        sse += node.counts[c] * d * d;
    }
    return sse;
}

struct PruneDecision {
    double cost = 0.0;
    bool collapse = false;
};

inline PruneDecision prune_decide(const std::vector<CartNode>& nodes, int i, double alpha,
                                  std::vector<PruneDecision>& memo) {
    const CartNode& node = nodes[static_cast<std::size_t>(i)];
    PruneDecision d;
    const double collapse_cost = node_sse(node) + alpha;
    if (node.is_leaf()) {
        d.cost = collapse_cost;
        d.collapse = true;
    } else {
        const double keep_cost = prune_decide(nodes, node.left, alpha, memo).cost +
                                 prune_decide(nodes, node.right, alpha, memo).cost;
        // Ties keep the split, so alpha = 0 never shrinks the tree.
        if (collapse_cost < keep_cost) {
            d.cost = collapse_cost;
            d.collapse = true;
        } else {
            d.cost = keep_cost;
            d.collapse = false;
        }
    }
    memo[static_cast<std::size_t>(i)] = d;
    return d;
}

inline int copy_pruned(const std::vector<CartNode>& nodes, int i,
                       const std::vector<PruneDecision>& memo, std::vector<CartNode>& out) {
    const int idx = static_cast<int>(out.size());
    out.push_back(nodes[static_cast<std::size_t>(i)]);
    if (memo[static_cast<std::size_t>(i)].collapse) {
        out[static_cast<std::size_t>(idx)].feature = -1;
        out[static_cast<std::size_t>(idx)].left = -1;
        out[static_cast<std::size_t>(idx)].right = -1;
    } else {
        const int left = copy_pruned(nodes, nodes[static_cast<std::size_t>(i)].left, memo, out);
        const int right = copy_pruned(nodes, nodes[static_cast<std::size_t>(i)].right, memo, out);
        out[static_cast<std::size_t>(idx)].left = left;
        out[static_cast<std::size_t>(idx)].right = right;
    }
    return idx;
}

}  // namespace detail

/// Cost-complexity pruning: returns the pruned subtree minimizing
/// sum-of-leaf squared error + alpha * (number of leaves), computed
/// exactly by a bottom-up pass. On cost ties the split is kept, which
/// makes alpha = 0 the identity.
inline CartModel prune(const CartModel& model, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    std::vector<detail::PruneDecision> memo(model.nodes().size());
    detail::prune_decide(model.nodes(), 0, alpha, memo);
    std::vector<CartNode> out;
    out.reserve(model.nodes().size());
    detail::copy_pruned(model.nodes(), 0, memo, out);
    return CartModel(model.num_classes(), std::move(out));
}

}  // namespace sovrate
